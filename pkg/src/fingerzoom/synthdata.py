"""Synthetic "fingerspelling in clutter": small glyph sequences in large frames.

Each letter is a procedurally drawn binary glyph (bars, arcs, dots).  A
sequence shows one glyph per letter for a few frames while it drifts
linearly; static distractor glyphs and a textured background fill the rest
of the frame.  Ground-truth boxes come straight from the blit coordinates.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter, uniform_filter

from .imaging import decode_pgm, encode_pgm, quantize
from .storage import atomic_write_bytes, atomic_write_text

DEFAULT_ALPHABET = "abcdefgh"


class DatasetError(Exception):
    pass


class DatasetNotFoundError(DatasetError, FileNotFoundError):
    pass


class CorruptDatasetError(DatasetError):
    pass


class ChecksumMismatchError(CorruptDatasetError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    alphabet: str = DEFAULT_ALPHABET
    frame_side: int = 112
    glyph_fraction: float = 0.1
    frames_per_letter: tuple[int, int] = (2, 4)
    distractor_count: int = 3
    jitter: int = 0
    blur: int = 0
    seed: int = 0
    drift: float = 1.0        # glyph speed, pixels per frame
    noise: float = 0.02       # per-frame sensor noise std
    stroke: float = 0.06      # stroke width as a fraction of the glyph side

    def __post_init__(self):
        if not 0 < self.glyph_fraction <= 0.5:
            raise ValueError("glyph_fraction must lie in (0, 0.5]")
        lo, hi = self.frames_per_letter
        if lo < 1 or hi < lo:
            raise ValueError("frames_per_letter must be a range with minimum >= 1")
        if len(set(self.alphabet)) < 2 or len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet needs at least two distinct symbols")
        if len(self.alphabet) > len(_GLYPHS):
            raise ValueError(f"at most {len(_GLYPHS)} glyph designs are available")

    @property
    def glyph_side(self) -> int:
        return max(4, int(round(self.frame_side * math.sqrt(self.glyph_fraction))))


@dataclass
class LabeledSequence:
    id: str
    frames: np.ndarray      # (T, H, W) in [0, 1]
    label: str
    gt_boxes: np.ndarray    # (T, 4) x_min, y_min, x_max, y_max
    seed: int = 0

    def __post_init__(self):
        if len(self.label) < 1:
            raise ValueError("label must be non-empty")
        if len(self.gt_boxes) != len(self.frames):
            raise ValueError("need one ground-truth box per frame")

    def __eq__(self, other):
        if not isinstance(other, LabeledSequence):
            return NotImplemented
        return (self.id == other.id and self.label == other.label and self.seed == other.seed
                and np.array_equal(self.frames, other.frames)
                and np.array_equal(self.gt_boxes, other.gt_boxes))


# -- glyph designs (unit square coordinates, y grows downward) -------------

def _seg(px, py, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    t = np.clip(((px - x0) * dx + (py - y0) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
    return np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))


def _bar(x0, y0, x1, y1):
    return lambda px, py, w: _seg(px, py, x0, y0, x1, y1) <= w / 2


def _arc(cx, cy, r, a0, a1):
    def draw(px, py, w):
        ang = np.degrees(np.arctan2(py - cy, px - cx)) % 360.0
        span = (a1 - a0) % 360.0 or 360.0
        inside = ((ang - a0) % 360.0) <= span
        return inside & (np.abs(np.hypot(px - cx, py - cy) - r) <= w / 2)
    return draw


def _dot(cx, cy, r):
    return lambda px, py, w: np.hypot(px - cx, py - cy) <= r


_GLYPHS: list[list[Callable]] = [
    [_arc(0.5, 0.5, 0.35, 0, 360), _dot(0.5, 0.5, 0.1)],                       # ring + dot
    [_bar(0.2, 0.1, 0.2, 0.9), _arc(0.2, 0.5, 0.35, 270, 90)],                  # D
    [_arc(0.5, 0.5, 0.38, 45, 315)],                                           # C
    [_bar(0.15, 0.15, 0.85, 0.85), _bar(0.85, 0.15, 0.15, 0.85)],               # X
    [_bar(0.15, 0.2, 0.85, 0.2), _bar(0.15, 0.5, 0.85, 0.5), _bar(0.15, 0.8, 0.85, 0.8)],  # three bars
    [_bar(0.3, 0.1, 0.3, 0.9), _bar(0.3, 0.1, 0.85, 0.1), _dot(0.7, 0.6, 0.12)],  # F + dot
    [_bar(0.5, 0.12, 0.12, 0.85), _bar(0.12, 0.85, 0.88, 0.85), _bar(0.88, 0.85, 0.5, 0.12)],  # triangle
    [_bar(0.2, 0.1, 0.2, 0.9), _bar(0.8, 0.1, 0.8, 0.9), _bar(0.2, 0.5, 0.8, 0.5)],  # H
    [_dot(0.3, 0.3, 0.12), _dot(0.7, 0.3, 0.12), _dot(0.3, 0.7, 0.12), _dot(0.7, 0.7, 0.12)],  # four dots
    [_arc(0.5, 0.1, 0.4, 30, 150), _arc(0.5, 0.9, 0.4, 210, 330)],             # two arcs
]


def glyph_bitmap(index: int, side: int, stroke: float = 0.06) -> np.ndarray:
    """Binary ``side x side`` raster of glyph design ``index``."""
    c = (np.arange(side) + 0.5) / side
    px, py = np.meshgrid(c, c)
    width = max(stroke, 1.5 / side)
    mask = np.zeros((side, side), dtype=bool)
    for part in _GLYPHS[index]:
        mask |= part(px, py, width)
    return mask.astype(np.float64)


def glyph_bank(spec: SynthSpec) -> dict[str, np.ndarray]:
    return {ch: glyph_bitmap(i, spec.glyph_side, spec.stroke) for i, ch in enumerate(spec.alphabet)}


# -- rendering -------------------------------------------------------------

def _sequence_rng(spec: SynthSpec, label: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{spec.seed}:{label}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _background(rng, side: int) -> np.ndarray:
    tex = gaussian_filter(rng.standard_normal((side, side)), sigma=3.0)
    tex /= np.abs(tex).max() + 1e-12
    return 0.3 + 0.12 * tex


def _paste(frame: np.ndarray, glyph: np.ndarray, x: int, y: int, value: float) -> None:
    s = glyph.shape[0]
    region = frame[y:y + s, x:x + s]
    np.copyto(region, value, where=glyph > 0)


def render_sequence(spec: SynthSpec, label: str, seq_id: str = "seq") -> LabeledSequence:
    """Render ``label`` as a frame sequence; a pure function of (spec, label)."""
    bad = sorted(set(label) - set(spec.alphabet))
    if bad:
        raise ValueError(f"label {label!r} uses symbols outside the alphabet: {bad}")
    if not label:
        raise ValueError("label must be non-empty")
    rng = _sequence_rng(spec, label)
    bank = glyph_bank(spec)
    side, s = spec.frame_side, spec.glyph_side
    lim = side - s

    counts = rng.integers(spec.frames_per_letter[0], spec.frames_per_letter[1] + 1, size=len(label))
    total = int(counts.sum())
    # trajectory of the top-left corner: linear drift per letter, bounced at the edges
    pos = np.empty((total, 2))
    p = rng.uniform(0.15 * lim, 0.85 * lim, size=2)
    t = 0
    for n in counts:
        ang = rng.uniform(0, 2 * math.pi)
        vel = spec.drift * np.array([math.cos(ang), math.sin(ang)])
        for _ in range(n):
            pos[t] = p
            p = p + vel
            for d in range(2):
                if not 0 <= p[d] <= lim:
                    vel[d] = -vel[d]
                    p[d] = min(max(p[d], 0.0), lim)
            t += 1
    blit = np.round(pos).astype(int)

    background = _background(rng, side)
    lo, hi = blit.min(axis=0), blit.max(axis=0) + s
    for _ in range(spec.distractor_count):
        glyph = bank[spec.alphabet[rng.integers(len(spec.alphabet))]]
        value = rng.uniform(0.7, 1.0)
        for _attempt in range(50):
            x, y = rng.integers(0, lim + 1, size=2)
            if x + s <= lo[0] or x >= hi[0] or y + s <= lo[1] or y >= hi[1]:
                break
        _paste(background, glyph, int(x), int(y), value)

    value = rng.uniform(0.8, 1.0)
    frames = np.empty((total, side, side))
    boxes = np.empty((total, 4))
    letters = np.repeat(np.arange(len(label)), counts)
    for t in range(total):
        frame = background.copy()
        x, y = blit[t]
        _paste(frame, bank[label[letters[t]]], int(x), int(y), value)
        dx = dy = 0
        if spec.jitter:
            dx, dy = rng.integers(-spec.jitter, spec.jitter + 1, size=2)
            # keep the glyph whole so the box stays exact after the roll
            dx, dy = int(np.clip(dx, -x, lim - x)), int(np.clip(dy, -y, lim - y))
            frame = np.roll(frame, (dy, dx), axis=(0, 1))
        if spec.blur:
            frame = uniform_filter(frame, size=2 * spec.blur + 1, mode="nearest")
        if spec.noise:
            frame = frame + spec.noise * rng.standard_normal(frame.shape)
        frames[t] = quantize(frame)
        boxes[t] = (x + dx, y + dy, x + dx + s, y + dy + s)
    return LabeledSequence(seq_id, frames, label, boxes, spec.seed)


def random_labels(alphabet: str, n: int, seed: int, min_len: int = 2, max_len: int = 5) -> list[str]:
    """Labels from a peaked first-order Markov chain without immediate repeats,
    so a character LM has structure to pick up."""
    rng = np.random.default_rng(seed)
    k = len(alphabet)
    trans = rng.dirichlet(np.full(k, 0.3), size=k)
    np.fill_diagonal(trans, 0.0)
    trans /= trans.sum(axis=1, keepdims=True)
    labels = []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        cur = int(rng.integers(k))
        word = [cur]
        for _ in range(length - 1):
            cur = int(rng.choice(k, p=trans[cur]))
            word.append(cur)
        labels.append("".join(alphabet[i] for i in word))
    return labels


def make_split(spec: SynthSpec, n: int, seed: int, prefix: str,
               labels: Sequence[str] | None = None) -> list[LabeledSequence]:
    if labels is None:
        labels = random_labels(spec.alphabet, n, seed)
    out = []
    for i, label in enumerate(labels):
        seq_seed = seed * 1_000_003 + i
        out.append(render_sequence(replace(spec, seed=seq_seed), label, f"{prefix}{i:05d}"))
    return out


# -- on-disk datasets ------------------------------------------------------

def _fmt_boxes(boxes: np.ndarray) -> str:
    return "[" + ",".join("[" + ",".join(f"{v:.3f}" for v in row) + "]" for row in boxes) + "]"


def save_dataset(path: str | Path, sequences: Iterable[LabeledSequence]) -> None:
    """Write one split: PGM frames under ``<id>/`` plus ``manifest.jsonl``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for seq in sequences:
        files = []
        digest = hashlib.sha256()
        for t, frame in enumerate(seq.frames):
            rel = f"{seq.id}/{t:04d}.pgm"
            data = encode_pgm(frame)
            atomic_write_bytes(root / rel, data)
            digest.update(data)
            files.append(rel)
        head = json.dumps({"id": seq.id, "label": seq.label, "frame_files": files})[:-1]
        lines.append(f'{head}, "gt_boxes": {_fmt_boxes(seq.gt_boxes)}, '
                     f'"seed": {int(seq.seed)}, "checksum": "{digest.hexdigest()}"}}')
    atomic_write_text(root / "manifest.jsonl", "\n".join(lines) + "\n")


def load_dataset(path: str | Path, verify: bool = True) -> list[LabeledSequence]:
    root = Path(path)
    manifest = root / "manifest.jsonl"
    if not root.exists():
        raise DatasetNotFoundError(f"dataset not found: {root}")
    if not manifest.exists():
        raise DatasetNotFoundError(f"no manifest.jsonl in {root}")
    out = []
    for lineno, line in enumerate(manifest.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            seq_id, label, files = rec["id"], rec["label"], rec["frame_files"]
            boxes = np.asarray(rec["gt_boxes"], dtype=np.float64).reshape(-1, 4)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorruptDatasetError(f"{manifest}:{lineno}: malformed record ({exc})") from None
        digest = hashlib.sha256()
        frames = []
        for rel in files:
            fpath = root / rel
            if not fpath.exists():
                raise CorruptDatasetError(f"{manifest}:{lineno}: missing frame file {rel}")
            data = fpath.read_bytes()
            digest.update(data)
            try:
                frames.append(decode_pgm(data))
            except ValueError as exc:
                raise CorruptDatasetError(f"{fpath}: {exc}") from None
        if verify and "checksum" in rec and rec["checksum"] != digest.hexdigest():
            raise ChecksumMismatchError(f"{manifest}:{lineno}: checksum mismatch for sequence {seq_id}")
        try:
            out.append(LabeledSequence(seq_id, np.stack(frames), label, boxes, int(rec.get("seed", 0))))
        except ValueError as exc:
            raise CorruptDatasetError(f"{manifest}:{lineno}: {exc}") from None
    return out
