from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fingerzoom.imaging import (EPS_PRIOR, Box, InvalidTubeError, box_average, compose_box,
                                crop_resize, decode_pgm, encode_pgm, iou, motion_prior, quantize,
                                sequence_priors)


def boxes(max_coord=50):
    @st.composite
    def _box(draw):
        x0 = draw(st.integers(0, max_coord - 1))
        y0 = draw(st.integers(0, max_coord - 1))
        w = draw(st.integers(1, max_coord))
        h = draw(st.integers(1, max_coord))
        return Box(x0, y0, x0 + w, y0 + h)
    return _box()


def test_iou_examples():
    a = Box(0, 0, 2, 2)
    assert iou(a, a) == 1.0
    assert iou(a, Box(5, 5, 6, 6)) == 0.0
    assert iou(a, Box(1, 0, 3, 2)) == pytest.approx(1 / 3, abs=1e-15)


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0
    assert iou(a, a) == 1.0


def test_box_rejects_degenerate():
    with pytest.raises(ValueError):
        Box(1, 0, 1, 2)
    with pytest.raises(ValueError):
        Box(0, 0, float("nan"), 1)


def test_crop_identity_is_bit_exact():
    rng = np.random.default_rng(0)
    frame = quantize(rng.random((24, 24)))
    out = crop_resize(frame, Box(0, 0, 24, 24), 24)
    assert np.array_equal(out, frame)


def test_crop_checkerboard_left_half():
    # left half is 1 wide, 2 tall: longer side already equals the target, so the
    # column is read unchanged (sample x = 0 exactly) and the right column is padding
    board = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = crop_resize(board, Box(0, 0, 1, 2), 2)
    assert np.array_equal(out, np.array([[0.0, 0.0], [1.0, 0.0]]))


def test_crop_bilinear_half_pixel_upsample():
    # 1x2 row upsampled x2: sample xs are -0.25, 0.25, 0.75, 1.25 -> clamp, lerp
    row = np.array([[0.0, 1.0]])
    out = crop_resize(row, Box(0, 0, 2, 1), 4)
    assert np.allclose(out[0], [0.0, 0.25, 0.75, 1.0])
    assert np.all(out[2:] == 0.0)


def test_crop_2x_downsample_is_box_average():
    rng = np.random.default_rng(3)
    frame = rng.random((8, 8))
    out = crop_resize(frame, Box(0, 0, 8, 8), 4)
    expected = frame.reshape(4, 2, 4, 2).mean(axis=(1, 3))
    assert np.allclose(out, expected, atol=1e-15)


@given(boxes(40), st.integers(1, 32))
@settings(max_examples=50)
def test_crop_output_is_square_target(box, target):
    frame = np.random.default_rng(1).random((40, 40))
    out = crop_resize(frame, box, target)
    assert out.shape == (target, target)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_crop_outside_frame_raises():
    with pytest.raises(InvalidTubeError):
        crop_resize(np.zeros((10, 10)), Box(20, 20, 30, 30), 8)


def test_compose_identity_outer():
    inner = Box(3, 4, 10, 12)
    assert compose_box(inner, Box(0, 0, 100, 100), (100, 100)) == inner


def test_compose_right_half_quarter():
    outer = Box(50, 0, 100, 100)          # right half of a 100x100 frame
    # cropped to 100x100 output: the region spans columns 0..50, the rest is padding
    inner = Box(25, 0, 50, 100)           # right half of the region
    assert compose_box(inner, outer, (100, 100)) == Box(75, 0, 100, 100)


@st.composite
def nest(draw):
    def frac_box(limit):
        x0 = Fraction(draw(st.integers(0, 60)), 7)
        y0 = Fraction(draw(st.integers(0, 60)), 7)
        w = Fraction(draw(st.integers(1, 60)), 5)
        h = Fraction(draw(st.integers(1, 60)), 5)
        return Box(x0, y0, x0 + w, y0 + h)
    return frac_box(0), frac_box(0), frac_box(0), draw(st.integers(4, 64)), draw(st.integers(4, 64))


@given(nest())
def test_compose_is_associative_exactly(data):
    a, b, c, d1, d2 = data
    left = compose_box(compose_box(a, b, (d1, d1)), c, (d2, d2))
    right = compose_box(a, compose_box(b, c, (d2, d2)), (d1, d1))
    assert left == right


def test_compose_matches_pixel_index_oracle():
    # integer-grid oracle: zoomed pixel (r, c) reads the source at
    # outer.min + (idx + 0.5) * step - 0.5, so the pixel edge idx maps to outer.min + idx*step
    rng = np.random.default_rng(7)
    for _ in range(200):
        x0, y0 = rng.integers(0, 40, size=2)
        w, h = rng.integers(4, 60, size=2)
        outer = Box(int(x0), int(y0), int(x0 + w), int(y0 + h))
        side = int(rng.integers(4, 40))
        step = max(w, h) / side
        c0, r0 = rng.integers(0, side - 1, size=2)
        c1 = int(rng.integers(c0 + 1, side + 1))
        r1 = int(rng.integers(r0 + 1, side + 1))
        inner = Box(int(c0), int(r0), c1, r1)
        got = compose_box(inner, outer, (side, side))
        first_centre_x = outer.x_min + (c0 + 0.5) * step - 0.5
        last_centre_x = outer.x_min + (c1 - 1 + 0.5) * step - 0.5
        assert got.x_min == pytest.approx(first_centre_x + 0.5 - 0.5 * step)
        assert got.x_max == pytest.approx(last_centre_x + 0.5 + 0.5 * step)
        first_centre_y = outer.y_min + (r0 + 0.5) * step - 0.5
        assert got.y_min == pytest.approx(first_centre_y + 0.5 - 0.5 * step)


def test_box_average():
    assert box_average([Box(1, 2, 3, 4)]) == Box(1, 2, 3, 4)
    assert box_average([Box(0, 0, 2, 2), Box(2, 2, 4, 4)]) == Box(1, 1, 3, 3)
    bs = [Box(0, 0, 2, 2), Box(2, 2, 4, 4), Box(1, 0, 5, 9)]
    assert box_average(bs) == box_average(bs[::-1])
    with pytest.raises(ValueError):
        box_average([])


def test_motion_prior_static_is_uniform_floor():
    f = np.full((16, 16), 0.3)
    m = motion_prior(f, f, f, (4, 4))
    assert np.all(m == EPS_PRIOR)


def test_motion_prior_localised_toggle():
    prev = np.zeros((16, 16))
    cur = prev.copy()
    cur[9, 13] = 1.0
    m = motion_prior(prev, cur, prev, (4, 4))
    assert np.unravel_index(np.argmax(m), m.shape) == (2, 3)


def test_motion_prior_translating_square_matches_pixel_oracle():
    frames = np.zeros((3, 12, 12))
    for t in range(3):
        frames[t, 3:6, 2 + 2 * t:5 + 2 * t] = 1.0
    m = motion_prior(frames[0], frames[1], frames[2], (3, 3))
    expected = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for r in range(4 * i, 4 * i + 4):
                for c in range(4 * j, 4 * j + 4):
                    acc += 0.5 * (abs(frames[1, r, c] - frames[0, r, c]) + abs(frames[2, r, c] - frames[1, r, c]))
            expected[i, j] = max(acc / 16, EPS_PRIOR)
    assert np.allclose(m, expected, atol=1e-15)


@given(st.floats(-0.5, 0.5))
@settings(max_examples=25)
def test_motion_prior_shift_invariant(shift):
    rng = np.random.default_rng(2)
    f = rng.random((3, 12, 12))
    a = motion_prior(f[0], f[1], f[2], (3, 3))
    b = motion_prior(f[0] + shift, f[1] + shift, f[2] + shift, (3, 3))
    assert np.allclose(a, b, atol=1e-12)
    assert np.all(b >= EPS_PRIOR)


def test_sequence_priors_boundaries():
    rng = np.random.default_rng(4)
    f = rng.random((4, 8, 8))
    p = sequence_priors(f, (2, 2))
    assert np.allclose(p[0], motion_prior(f[1], f[0], f[1], (2, 2)))
    assert np.allclose(p[3], motion_prior(f[2], f[3], f[2], (2, 2)))
    assert np.all(sequence_priors(f[:1], (2, 2)) == EPS_PRIOR)


def test_pgm_round_trip():
    rng = np.random.default_rng(5)
    frame = quantize(rng.random((7, 11)))
    data = encode_pgm(frame)
    assert data.startswith(b"P5\n11 7\n255\n")
    assert np.array_equal(decode_pgm(data), frame)
