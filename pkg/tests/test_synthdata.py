import itertools
import json

import numpy as np
import pytest

from fingerzoom.synthdata import (ChecksumMismatchError, CorruptDatasetError, DatasetNotFoundError,
                                  SynthSpec, glyph_bank, load_dataset, make_split, random_labels,
                                  render_sequence, save_dataset)


def test_render_is_deterministic():
    spec = SynthSpec(seed=7)
    a = render_sequence(spec, "abc")
    b = render_sequence(spec, "abc")
    assert a == b
    assert not np.array_equal(a.frames[0], render_sequence(SynthSpec(seed=8), "abc").frames[0])


def test_fixed_frames_per_letter_count():
    seq = render_sequence(SynthSpec(frames_per_letter=(3, 3)), "ab")
    assert seq.frames.shape == (6, 112, 112)
    assert seq.gt_boxes.shape == (6, 4)
    assert (seq.gt_boxes[:, :2] >= 0).all() and (seq.gt_boxes[:, 2:] <= 112).all()


def test_frames_are_8bit_representable():
    seq = render_sequence(SynthSpec(), "hg")
    assert seq.frames.min() >= 0 and seq.frames.max() <= 1
    assert np.array_equal(np.round(seq.frames * 255) / 255, seq.frames)


def test_unknown_symbol_raises():
    with pytest.raises(ValueError):
        render_sequence(SynthSpec(), "abz")
    with pytest.raises(ValueError):
        render_sequence(SynthSpec(), "")


@pytest.mark.parametrize("kwargs", [dict(glyph_fraction=0.0), dict(glyph_fraction=0.6),
                                    dict(frames_per_letter=(0, 2)), dict(alphabet="a")])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SynthSpec(**kwargs)


def test_glyph_area_fraction_over_100_seeds():
    fractions = []
    for seed in range(100):
        seq = render_sequence(SynthSpec(seed=seed), "ab")
        b = seq.gt_boxes
        fractions.append(np.mean((b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])) / 112 ** 2)
    assert 0.05 <= np.mean(fractions) <= 0.15


def test_glyphs_pairwise_distinct():
    bank = glyph_bank(SynthSpec())
    for a, b in itertools.combinations(bank.values(), 2):
        assert np.mean(np.abs(a - b)) > 0.1


def test_gt_box_tracks_glyph_pixels():
    # no background, noise or distractors: every bright pixel lies in the box
    spec = SynthSpec(distractor_count=0, noise=0.0, jitter=3, seed=3)
    seq = render_sequence(spec, "cd")
    bank = glyph_bank(spec)
    for t, (frame, box) in enumerate(zip(seq.frames, seq.gt_boxes)):
        x0, y0, x1, y1 = box.astype(int)
        letter = seq.label[0] if t < 1 else None
        inside = frame[y0:y1, x0:x1]
        assert inside.shape == (spec.glyph_side, spec.glyph_side)
        if letter is not None:
            assert np.all(inside[bank[letter] > 0] >= 0.8 - 1e-9)


def test_random_labels_no_repeats():
    labels = random_labels("abcdefgh", 200, 0)
    assert all(2 <= len(w) <= 5 for w in labels)
    assert all(a != b for w in labels for a, b in zip(w, w[1:]))
    assert labels == random_labels("abcdefgh", 200, 0)


def test_save_load_round_trip(tmp_path):
    seqs = make_split(SynthSpec(frame_side=48, glyph_fraction=0.1), 3, 5, "tr")
    save_dataset(tmp_path / "tr", seqs)
    back = load_dataset(tmp_path / "tr")
    assert back == seqs
    rec = json.loads((tmp_path / "tr" / "manifest.jsonl").read_text().splitlines()[0])
    assert set(rec) >= {"id", "label", "frame_files", "gt_boxes", "seed"}


def test_manifest_boxes_have_three_decimals(tmp_path):
    save_dataset(tmp_path, make_split(SynthSpec(frame_side=32), 1, 0, "x"))
    line = (tmp_path / "manifest.jsonl").read_text()
    assert '"gt_boxes": [[' in line
    coords = line.split('"gt_boxes": ')[1].split(', "seed"')[0]
    assert all(len(v.split(".")[1].strip("[]")) == 3 for v in coords.split(","))


def test_load_missing_path(tmp_path):
    with pytest.raises(DatasetNotFoundError):
        load_dataset(tmp_path / "nope")


def test_missing_frame_is_corrupt(tmp_path):
    seqs = make_split(SynthSpec(frame_side=32), 1, 0, "x")
    save_dataset(tmp_path, seqs)
    (tmp_path / seqs[0].id / "0001.pgm").unlink()
    with pytest.raises(CorruptDatasetError):
        load_dataset(tmp_path)


def test_malformed_manifest_is_corrupt(tmp_path):
    (tmp_path / "manifest.jsonl").write_text("{not json\n")
    with pytest.raises(CorruptDatasetError) as err:
        load_dataset(tmp_path)
    assert not isinstance(err.value, ChecksumMismatchError)


def test_checksum_mismatch(tmp_path):
    seqs = make_split(SynthSpec(frame_side=32), 1, 0, "x")
    save_dataset(tmp_path, seqs)
    f = tmp_path / seqs[0].id / "0000.pgm"
    data = bytearray(f.read_bytes())
    data[-1] ^= 0xFF
    f.write_bytes(bytes(data))
    with pytest.raises(ChecksumMismatchError):
        load_dataset(tmp_path)
    assert len(load_dataset(tmp_path, verify=False)) == 1
