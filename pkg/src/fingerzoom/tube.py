"""Attention maps -> candidate boxes -> linked tube -> zoomed frames."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .imaging import Box, InvalidTubeError, box_average, compose_box, crop_resize, iou


class OverZoomError(InvalidTubeError):
    """The composed crop is too small to resample meaningfully."""


@dataclass(frozen=True)
class Candidate:
    box: Box
    score: float
    t: int
    rank: int


@dataclass
class Tube:
    boxes: list[Box]
    scores: list[float]
    indices: list[int]
    objective: float


@dataclass(frozen=True)
class ZoomSchedule:
    ratios: tuple[float, ...]

    def __post_init__(self):
        if not self.ratios:
            raise ValueError("a zoom schedule needs at least one ratio")
        if not all(0.0 < r < 1.0 for r in self.ratios):
            raise ValueError(f"zoom ratios must lie in (0, 1): {self.ratios}")

    def __len__(self):
        return len(self.ratios)


DEFAULT_RATIOS = (0.9, 0.9 ** 2, 0.9 ** 3, 0.9 ** 4)


def find_peaks(attention: np.ndarray, k: int) -> list[tuple[int, int]]:
    """Up to ``k`` cells that are >= all 8 neighbours, strongest first.

    Ties go to row-major order; if there are fewer than ``k`` local maxima the
    list is topped up with the strongest remaining cells.
    """
    a = np.asarray(attention, dtype=np.float64)
    h, w = a.shape
    padded = np.pad(a, 1, constant_values=-np.inf)
    is_peak = np.ones_like(a, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy or dx:
                is_peak &= a >= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    flat = a.reshape(-1)
    order = np.lexsort((np.arange(flat.size), -flat))  # value desc, then row-major
    peaks = [int(i) for i in order if is_peak.reshape(-1)[i]]
    if len(peaks) < k:
        chosen = set(peaks)
        peaks += [int(i) for i in order if int(i) not in chosen][:k - len(peaks)]
    return [divmod(i, w) for i in peaks[:k]]


def make_candidates(peaks: Sequence[tuple[int, int]], attention: np.ndarray, ratio: float,
                    frame_dims: tuple[float, float], t: int = 0,
                    square: bool = False) -> list[Candidate]:
    """Boxes of ``ratio`` times the frame size centred on each peak cell.

    ``frame_dims`` is (width, height).  Boxes are shifted, never shrunk, to
    stay inside the frame.
    """
    gh, gw = attention.shape
    W, H = frame_dims
    bw, bh = ratio * W, ratio * H
    if square:
        bw = bh = ratio * min(W, H)
    out = []
    for rank, (i, j) in enumerate(peaks):
        cx = (j + 0.5) * W / gw
        cy = (i + 0.5) * H / gh
        x0 = min(max(cx - bw / 2, 0.0), W - bw)
        y0 = min(max(cy - bh / 2, 0.0), H - bh)
        out.append(Candidate(Box(x0, y0, x0 + bw, y0 + bh), float(attention[i, j]), t, rank))
    return out


def link_score(a: Candidate, b: Candidate, lam: float) -> float:
    return a.score + b.score + lam * iou(a.box, b.box)


def tube_objective(chain: Sequence[Candidate], lam: float) -> float:
    """Mean linking score of a chain; a single frame scores its box score."""
    if len(chain) == 1:
        return chain[0].score
    total = 0.0
    for a, b in zip(chain, chain[1:]):
        total += link_score(a, b, lam)
    return total / len(chain)


def best_tube(candidates: Sequence[Sequence[Candidate]], lam: float = 0.1) -> Tube:
    """Chain of one candidate per frame with the highest mean linking score
    (Viterbi over candidate indices; ties keep the lower index)."""
    if not candidates:
        raise ValueError("no frames to link")
    for t, cands in enumerate(candidates):
        if not cands:
            raise ValueError(f"frame {t} has no candidate boxes")
    T = len(candidates)
    if T == 1:
        scores = [c.score for c in candidates[0]]
        j = int(np.argmax(scores))
        chain = [candidates[0][j]]
        return Tube([chain[0].box], [chain[0].score], [j], tube_objective(chain, lam))

    best = np.zeros(len(candidates[0]))
    back = []
    for t in range(1, T):
        prev, cur = candidates[t - 1], candidates[t]
        trans = np.array([[best[i] + link_score(p, c, lam) for i, p in enumerate(prev)] for c in cur])
        arg = np.argmax(trans, axis=1)
        back.append(arg)
        best = trans[np.arange(len(cur)), arg]
    idx = [int(np.argmax(best))]
    for arg in reversed(back):
        idx.append(int(arg[idx[-1]]))
    idx.reverse()
    chain = [candidates[t][i] for t, i in enumerate(idx)]
    return Tube([c.box for c in chain], [c.score for c in chain], idx, tube_objective(chain, lam))


def attention_tube(attention_maps: np.ndarray, ratio: float, frame_dims: tuple[float, float],
                   k: int = 3, lam: float = 0.1, square: bool = False) -> Tube:
    """find_peaks + make_candidates for every frame, then best_tube."""
    cands = []
    for t, a in enumerate(attention_maps):
        cands.append(make_candidates(find_peaks(a, k), a, ratio, frame_dims, t, square))
    return best_tube(cands, lam)


def zoom_sequence(originals: np.ndarray, tube: Tube, history: Box, target_max_side: int,
                  current_dims: tuple[int, int], per_frame: bool = False,
                  min_side: float = 2.0):
    """Crop the tube region from the original frames.

    Tube boxes live in the current input's coordinates (``current_dims`` =
    width, height); ``history`` maps that frame back to original coordinates.
    By default the tube is averaged into one static box.  Returns
    ``(zoomed frames, composed box or per-frame boxes)``.
    """
    if per_frame:
        composed = [compose_box(b, history, current_dims) for b in tube.boxes]
    else:
        composed = [compose_box(box_average(tube.boxes), history, current_dims)]
    for box in composed:
        if min(box.width, box.height) < min_side:
            raise OverZoomError(f"composed box {box.as_tuple()} is below {min_side}px on a side")
    if per_frame:
        zoomed = np.stack([crop_resize(f, b, target_max_side) for f, b in zip(originals, composed)])
        return zoomed, composed
    return crop_resize(originals, composed[0], target_max_side), composed[0]


def format_tube(boxes: Sequence[Box], scores: Sequence[float]) -> str:
    """``t x_min y_min x_max y_max score`` per line."""
    return "".join(
        f"{t} {b.x_min:.3f} {b.y_min:.3f} {b.x_max:.3f} {b.y_max:.3f} {s:.6f}\n"
        for t, (b, s) in enumerate(zip(boxes, scores)))


def parse_tube(text: str) -> tuple[list[Box], list[float]]:
    boxes, scores = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        boxes.append(Box(*(float(v) for v in parts[1:5])))
        scores.append(float(parts[5]))
    return boxes, scores


def write_tube(path: str | Path, boxes: Sequence[Box], scores: Sequence[float]) -> None:
    from .storage import atomic_write_text
    atomic_write_text(path, format_tube(boxes, scores))
