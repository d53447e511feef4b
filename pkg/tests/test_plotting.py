import numpy as np
import pytest

from fingerzoom.bench import zoom_vs_enlarge
from fingerzoom.imaging import Box
from fingerzoom.plotting import (attention_blend, save_accuracy_curve, save_attention_overlay,
                                 save_tube_overlay, upsample_nearest)


def test_upsample_nearest_blocks():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    up = upsample_nearest(a, (4, 6))
    assert np.array_equal(up[:2, :3], np.ones((2, 3)))
    assert np.array_equal(up[2:, 3:], np.full((2, 3), 4.0))


def test_blend_is_half_frame_half_heat():
    frame = np.full((4, 4), 0.2)
    rgb = attention_blend(frame, np.full((2, 2), 0.25))
    assert rgb.shape == (4, 4, 3)
    assert np.all(rgb >= 0.5 * 0.2 - 1e-12) and np.all(rgb <= 0.5 * 0.2 + 0.5 + 1e-12)


def test_figures_are_written(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.random((3, 20, 20))
    save_attention_overlay(tmp_path / "a.png", frames[0], rng.random((3, 3)))
    save_attention_overlay(tmp_path / "a.pgm", frames[0], rng.random((3, 3)))
    save_tube_overlay(tmp_path / "t.png", frames, [Box(2, 2, 10, 10)] * 3, [Box(3, 3, 9, 9)] * 3)
    save_accuracy_curve(tmp_path / "c.png", [0.2, 0.5], [0.9, 0.81], baseline=0.2)
    for name in ("a.png", "a.pgm", "t.png", "c.png"):
        assert (tmp_path / name).stat().st_size > 0
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5")


@pytest.mark.parametrize("ratio", [0.9, 0.81, 0.729, 0.6561, 0.5])
def test_bench_equal_resolution_and_memory_ratio(ratio):
    b = zoom_vs_enlarge(ratio, frames=8)
    assert b.zoom_scale == pytest.approx(b.enlarge_scale, rel=0.02)
    assert b.zoom_peak_bytes < b.enlarge_peak_bytes
    assert abs(b.measured_ratio / ratio ** 2 - 1) < 0.2


def test_bench_rejects_bad_ratio():
    with pytest.raises(ValueError):
        zoom_vs_enlarge(1.0)
