"""Frames, boxes, cropping and the motion prior.

Frames are plain 2-D float arrays (rows x cols) with intensities in [0, 1].
Boxes use continuous pixel coordinates: pixel ``(r, c)`` covers
``[c, c+1) x [r, r+1)``, so the whole frame is ``Box(0, 0, W, H)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EPS_PRIOR = 1e-6


class InvalidTubeError(ValueError):
    """A box that cannot be cropped (outside the frame or degenerate)."""


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(float(v)) for v in coords):
            raise ValueError(f"non-finite box coordinates: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box: {coords}")

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return self.width * self.height

    def as_tuple(self) -> tuple:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def to_float(self) -> "Box":
        return Box(*(float(v) for v in self.as_tuple()))

    @classmethod
    def full(cls, width, height) -> "Box":
        return cls(0, 0, width, height)


def intersection_area(a: Box, b: Box):
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def iou(a: Box, b: Box) -> float:
    """Jaccard index of two boxes."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    return inter / union


def box_average(boxes: Iterable[Box]) -> Box:
    boxes = list(boxes)
    if not boxes:
        raise ValueError("cannot average an empty box sequence")
    coords = np.array([b.as_tuple() for b in boxes], dtype=np.float64)
    return Box(*(float(v) for v in coords.mean(axis=0)))


def output_size(box: Box, target_max_side: int) -> tuple[int, int]:
    """(rows, cols) of the unpadded region a crop of ``box`` occupies."""
    long_side = max(box.width, box.height)
    cols = max(1, int(round(float(box.width) * target_max_side / float(long_side))))
    rows = max(1, int(round(float(box.height) * target_max_side / float(long_side))))
    return min(rows, target_max_side), min(cols, target_max_side)


def _sample_axis(start: float, step: float, n: int, limit: int):
    # half-pixel centres: output index i reads source coordinate start + (i+0.5)*step - 0.5
    src = start + (np.arange(n) + 0.5) * step - 0.5
    src = np.clip(src, 0.0, limit - 1)
    i0 = np.floor(src).astype(np.intp)
    frac = src - i0
    i1 = np.minimum(i0 + 1, limit - 1)
    return i0, i1, frac


def crop_resize(frame: np.ndarray, box: Box, target_max_side: int) -> np.ndarray:
    """Crop ``box`` from ``frame`` and resample it bilinearly in one pass.

    The longer side of the box maps to ``target_max_side`` pixels; the shorter
    side keeps the aspect ratio and the rest of the square output is zero.
    The region is anchored at the top-left corner of the output.
    """
    frame = np.asarray(frame)
    height, width = frame.shape[-2:]
    fb = box.to_float()
    if fb.x_max <= 0 or fb.y_max <= 0 or fb.x_min >= width or fb.y_min >= height:
        raise InvalidTubeError(f"box {fb.as_tuple()} lies outside a {width}x{height} frame")
    rows, cols = output_size(fb, target_max_side)
    step = max(fb.width, fb.height) / target_max_side
    x0, x1, fx = _sample_axis(fb.x_min, step, cols, width)
    y0, y1, fy = _sample_axis(fb.y_min, step, rows, height)

    fx = fx[None, :]
    fy = fy[:, None]
    # explicit in-place blending keeps the number of live buffers fixed
    # (numpy's temporary elision would otherwise depend on array size)
    frame = frame.astype(np.float64, copy=False)
    out = np.zeros(frame.shape[:-2] + (target_max_side, target_max_side), dtype=np.float64)
    top = frame[..., y0[:, None], x0[None, :]]
    top *= 1.0 - fx
    tmp = frame[..., y0[:, None], x1[None, :]]
    tmp *= fx
    top += tmp
    del tmp
    bottom = frame[..., y1[:, None], x0[None, :]]
    bottom *= 1.0 - fx
    tmp = frame[..., y1[:, None], x1[None, :]]
    tmp *= fx
    bottom += tmp
    del tmp
    top *= 1.0 - fy
    bottom *= fy
    np.add(top, bottom, out=out[..., :rows, :cols])
    return out


def compose_box(inner: Box, outer: Box, zoomed_dims: tuple[int, int]) -> Box:
    """Map ``inner`` (coordinates of the frame cropped by ``outer``) back into
    the coordinate frame ``outer`` is expressed in.

    ``zoomed_dims`` is ``(width, height)`` of the cropped frame.  Works with
    any numeric type, so ``fractions.Fraction`` inputs give exact results.
    """
    scale = max(outer.width, outer.height) / max(zoomed_dims)
    return Box(
        outer.x_min + inner.x_min * scale,
        outer.y_min + inner.y_min * scale,
        outer.x_min + inner.x_max * scale,
        outer.y_min + inner.y_max * scale,
    )


def _pool_matrix(n_out: int, n_in: int) -> np.ndarray:
    cell = (np.arange(n_in) * n_out) // n_in
    m = np.zeros((n_out, n_in))
    m[cell, np.arange(n_in)] = 1.0
    return m / m.sum(axis=1, keepdims=True)


def box_downsample(image: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Average ``image`` over a ``grid=(h, w)`` lattice of equal-share cells."""
    h, w = grid
    rows, cols = image.shape[-2:]
    return _pool_matrix(h, rows) @ image @ _pool_matrix(w, cols).T


def motion_prior(prev: np.ndarray, cur: np.ndarray, nxt: np.ndarray,
                 grid: tuple[int, int]) -> np.ndarray:
    diff = 0.5 * (np.abs(cur - prev) + np.abs(nxt - cur))
    return np.maximum(box_downsample(diff, grid), EPS_PRIOR)


def sequence_priors(frames: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Motion prior for every frame; boundary frames mirror their only neighbour."""
    n = len(frames)
    out = np.empty((n,) + tuple(grid))
    for t in range(n):
        prev = frames[t - 1] if t > 0 else frames[min(t + 1, n - 1)]
        nxt = frames[t + 1] if t < n - 1 else frames[max(t - 1, 0)]
        out[t] = motion_prior(prev, frames[t], nxt, grid)
    return out


def validate_frame(frame: np.ndarray) -> None:
    if frame.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale frame, got shape {frame.shape}")
    if not np.all((frame >= 0.0) & (frame <= 1.0)):
        raise ValueError("frame intensities must lie in [0, 1]")


# -- PGM (P5, maxval 255) --------------------------------------------------

def quantize(frame: np.ndarray) -> np.ndarray:
    """Snap intensities to the k/255 lattice that PGM files can hold."""
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0) / 255.0


def encode_pgm(frame: np.ndarray) -> bytes:
    validate_frame(frame)
    rows, cols = frame.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    return header + np.round(frame * 255.0).astype(np.uint8).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM file (magic {tokens[0]!r})")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}")
    pixels = data[pos + 1:pos + 1 + rows * cols]
    if len(pixels) != rows * cols:
        raise ValueError("truncated PGM pixel data")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(rows, cols) / 255.0


def write_pgm(path: str | Path, frame: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(frame))


def read_pgm(path: str | Path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def boxes_to_array(boxes: Sequence[Box]) -> np.ndarray:
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)


def array_to_boxes(arr: np.ndarray) -> list[Box]:
    return [Box(*(float(v) for v in row)) for row in np.asarray(arr)]
