"""Memory cost of zooming into a region versus enlarging the whole frame.

Both paths reach the same effective glyph resolution: zooming crops a region
of side R * S and resamples it to N pixels, enlarging resamples the whole
S-pixel frame to N / R pixels.  Peak traced allocation is recorded for each.
"""

from __future__ import annotations

import tracemalloc
from dataclasses import asdict, dataclass

import numpy as np

from .imaging import Box, crop_resize


@dataclass(frozen=True)
class BenchResult:
    ratio: float
    frame_side: int
    input_side: int
    enlarged_side: int
    frames: int
    zoom_peak_bytes: int
    enlarge_peak_bytes: int
    zoom_scale: float          # output pixels per source pixel
    enlarge_scale: float

    @property
    def measured_ratio(self) -> float:
        return self.zoom_peak_bytes / self.enlarge_peak_bytes

    @property
    def expected_ratio(self) -> float:
        return (self.input_side / self.enlarged_side) ** 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["measured_ratio"] = self.measured_ratio
        d["expected_ratio"] = self.expected_ratio
        return d


def _traced_peak(fn) -> int:
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        base = tracemalloc.get_traced_memory()[0]
        out = fn()
        peak = tracemalloc.get_traced_memory()[1]
        del out
    finally:
        tracemalloc.stop()
    return peak - base


def zoom_vs_enlarge(ratio: float, frame_side: int = 112, input_side: int = 56,
                    frames: int = 16, seed: int = 0) -> BenchResult:
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    originals = rng.random((frames, frame_side, frame_side))
    side = ratio * frame_side
    x0 = (frame_side - side) / 2
    region = Box(x0, x0, x0 + side, x0 + side)
    enlarged = int(round(input_side / ratio))
    full = Box(0.0, 0.0, float(frame_side), float(frame_side))
    zoom_peak = _traced_peak(lambda: crop_resize(originals, region, input_side))
    enlarge_peak = _traced_peak(lambda: crop_resize(originals, full, enlarged))
    return BenchResult(ratio, frame_side, input_side, enlarged, frames, zoom_peak, enlarge_peak,
                       input_side / side, enlarged / frame_side)
