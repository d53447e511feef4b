import numpy as np
import pytest
from hypothesis import given, strategies as st

from fingerzoom.imaging import Box
from fingerzoom.metrics import (align, corpus_letter_accuracy, detection_eval, letter_accuracy,
                                miss_rate)


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def test_examples():
    assert letter_accuracy("helo", "hello") == 0.8
    assert letter_accuracy("", "abc") == 0.0
    assert letter_accuracy("abc", "abc") == 1.0
    assert letter_accuracy("xxxxxx", "ab") == 1.0 - 6 / 2


def test_empty_reference_raises():
    with pytest.raises(ValueError):
        letter_accuracy("a", "")


def test_alignment_prefers_substitution():
    a = align("axc", "abc")
    assert (a.substitutions, a.deletions, a.insertions) == (1, 0, 0)


words = st.text(alphabet="abcd", max_size=8)


@given(st.text(alphabet="abcd", min_size=1, max_size=8))
def test_self_accuracy_is_one(x):
    assert letter_accuracy(x, x) == 1.0


@given(words, st.text(alphabet="abcd", min_size=1, max_size=8))
def test_relabel_invariance(h, r):
    table = str.maketrans("abcd", "dcab")
    assert letter_accuracy(h, r) == letter_accuracy(h.translate(table), r.translate(table))


def test_levenshtein_oracle_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        h = "".join(rng.choice(list("abcde"), size=rng.integers(0, 9)))
        r = "".join(rng.choice(list("abcde"), size=rng.integers(1, 9)))
        assert letter_accuracy(h, r) == 1.0 - levenshtein(h, r) / len(r)


def test_corpus_pooling():
    acc = corpus_letter_accuracy([("a", "ab"), ("abcd", "abcd")])
    assert acc == 1.0 - 1 / 6


def test_detection_examples():
    gt = Box(0, 0, 10, 10)
    rep = detection_eval([gt], [gt])
    assert rep.avg_iou == 1.0 and rep.miss_rate == 0.0
    half = Box(0, 0, 5, 10)
    assert miss_rate(half, gt) == 0.5
    disjoint = detection_eval([Box(20, 20, 30, 30)], [gt])
    assert disjoint.avg_iou == 0.0 and disjoint.miss_rate == 1.0


def test_detection_skips_missing_and_validates():
    gt = Box(0, 0, 10, 10)
    rep = detection_eval([gt, None], [gt, gt])
    assert rep.frames == 1
    with pytest.raises(ValueError):
        detection_eval([gt], [gt, gt])
    with pytest.raises(ValueError):
        detection_eval([None], [gt])
