import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from fingerzoom.ctc import (Alphabet, UnalignableError, brute_force_nll, collapse, ctc_grad,
                            ctc_loss, ctc_loss_and_grad, greedy_decode, softmax)

A, B = 1, 2


def random_posteriors(rng, T, K):
    return softmax(rng.normal(size=(T, K)) * 2.0)


def test_collapse_examples():
    assert collapse((A, A, 0, B)) == (A, B)
    assert collapse((A, 0, A)) == (A, A)
    assert collapse((0, 0)) == ()


@given(st.lists(st.integers(0, 3), max_size=12))
def test_collapse_idempotent(path):
    once = collapse(path)
    # re-reading "aa" as frame labels merges it, so idempotence needs repeat-free output
    assume(all(a != b for a, b in zip(once, once[1:])))
    assert collapse(once) == once


def test_loss_single_frame():
    p = np.array([[0.2, 0.5, 0.3]])
    assert ctc_loss(p, (A,)) == pytest.approx(-math.log(0.5), abs=1e-15)


def test_loss_two_frames_three_paths():
    p = np.array([[0.1, 0.6, 0.3], [0.3, 0.5, 0.2]])
    expected = -math.log(0.6 * 0.5 + 0.6 * 0.3 + 0.1 * 0.5)
    assert ctc_loss(p, (A,)) == pytest.approx(expected, abs=1e-15)


def test_unalignable_is_infinite_loss_and_grad_error():
    p = np.array([[0.2, 0.5, 0.3]])
    assert ctc_loss(p, (A, A)) == math.inf
    with pytest.raises(UnalignableError):
        ctc_grad(p, (A, A))


def test_brute_force_counts_paths():
    p = np.full((2, 2), 0.5)
    # labelings over {blank, a}: (-,-) (-,a) (a,-) (a,a); three collapse to "a"
    assert math.exp(-brute_force_nll(p, (A,))) == pytest.approx(0.75)
    assert math.exp(-brute_force_nll(p, ())) == pytest.approx(0.25)


def test_brute_force_rejects_large():
    with pytest.raises(ValueError):
        brute_force_nll(np.full((13, 4), 0.25), (A,))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2 ** 31 - 1), st.data())
def test_loss_matches_brute_force(T, L, seed, data):
    rng = np.random.default_rng(seed)
    p = random_posteriors(rng, T, L + 1)
    target = tuple(data.draw(st.lists(st.integers(1, L), max_size=T)))
    got = ctc_loss(p, target)
    ref = brute_force_nll(p, target)
    if math.isinf(ref):
        assert math.isinf(got)
    else:
        assert abs(got - ref) <= 1e-9


@pytest.mark.parametrize("T,L", [(1, 1), (3, 2), (4, 2), (5, 1)])
def test_total_probability_is_one(T, L):
    rng = np.random.default_rng(T * 10 + L)
    p = random_posteriors(rng, T, L + 1)
    total = 0.0
    for n in range(T + 1):
        for target in itertools.product(range(1, L + 1), repeat=n):
            total += math.exp(-brute_force_nll(p, target))
    assert total == pytest.approx(1.0, abs=1e-9)
    dp_total = sum(math.exp(-ctc_loss(p, tgt)) for n in range(T + 1)
                   for tgt in itertools.product(range(1, L + 1), repeat=n))
    assert dp_total == pytest.approx(1.0, abs=1e-9)


def test_grad_single_frame_analytic():
    logits = np.array([[0.3, -1.0, 2.0]])
    p = softmax(logits)
    g = ctc_grad(p, (A,))
    onehot = np.array([[0.0, 1.0, 0.0]])
    assert np.allclose(g, p - onehot, atol=1e-15)


def _fd_grad(logits, target, step=1e-4):
    num = np.zeros_like(logits)
    for idx in np.ndindex(logits.shape):
        up = logits.copy()
        up[idx] += step
        down = logits.copy()
        down[idx] -= step
        num[idx] = (ctc_loss(softmax(up), target) - ctc_loss(softmax(down), target)) / (2 * step)
    return num


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(30):
        T = int(rng.integers(1, 7))
        L = int(rng.integers(1, 4))
        n = int(rng.integers(0, T + 1))
        target = tuple(int(v) for v in rng.integers(1, L + 1, size=n))
        logits = rng.normal(size=(T, L + 1))
        p = softmax(logits)
        if math.isinf(ctc_loss(p, target)):
            continue
        g = ctc_grad(p, target)
        num = _fd_grad(logits, target)
        rel = np.abs(g - num) / np.maximum(np.abs(g) + np.abs(num), 1e-8)
        assert rel.max() < 1e-6
        assert np.allclose(g.sum(axis=1), 0.0, atol=1e-9)


def test_long_sequence_stays_finite():
    rng = np.random.default_rng(2)
    T, K = 1000, 5
    p = np.maximum(random_posteriors(rng, T, K), 1e-30)
    p /= p.sum(axis=1, keepdims=True)
    target = tuple(int(v) for v in rng.integers(1, K, size=200))
    loss, grad = ctc_loss_and_grad(p, target)
    assert math.isfinite(loss) and loss > 0
    assert np.isfinite(grad).all()


def test_greedy_decode():
    p = np.eye(3)[[A, A, 0]]
    assert greedy_decode(p) == (A,)
    assert greedy_decode(np.eye(3)[[0, 0, 0]]) == ()
    # ties go to the lower label index
    assert greedy_decode(np.array([[0.4, 0.4, 0.2]])) == ()
    rng = np.random.default_rng(0)
    p = random_posteriors(rng, 8, 4)
    assert greedy_decode(p) == collapse(np.argmax(p, axis=1).tolist())


def test_alphabet_round_trip():
    alpha = Alphabet.from_string("abc")
    assert alpha.size == 4
    assert alpha.encode("cab") == (3, 1, 2)
    assert alpha.decode((3, 1, 2)) == "cab"
    with pytest.raises(ValueError):
        alpha.encode("abz")
    with pytest.raises(ValueError):
        Alphabet.from_string("aa")
