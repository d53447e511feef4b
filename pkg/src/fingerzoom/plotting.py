"""Diagnostic figures.  Everything renders off-screen to files."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .imaging import Box, encode_pgm  # noqa: E402
from .storage import atomic_write_bytes  # noqa: E402

BLEND = 0.5


def upsample_nearest(attention: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour upsampling of an h x w map to ``shape`` (rows, cols)."""
    h, w = attention.shape
    rows = np.minimum((np.arange(shape[0]) * h) // shape[0], h - 1)
    cols = np.minimum((np.arange(shape[1]) * w) // shape[1], w - 1)
    return attention[rows[:, None], cols[None, :]]


def attention_blend(frame: np.ndarray, attention: np.ndarray, cmap: str = "jet") -> np.ndarray:
    """RGB image: the grey frame alpha-blended at 0.5 with the colour-mapped attention."""
    up = upsample_nearest(attention, frame.shape)
    span = up.max() - up.min()
    norm = (up - up.min()) / span if span > 0 else np.zeros_like(up)
    heat = plt.get_cmap(cmap)(norm)[..., :3]
    grey = np.repeat(np.clip(frame, 0, 1)[..., None], 3, axis=2)
    return (1 - BLEND) * grey + BLEND * heat


def _save_fig(fig, path: Path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format=path.suffix.lstrip(".") or "png", dpi=100, bbox_inches="tight")
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def save_attention_overlay(path: str | Path, frame: np.ndarray, attention: np.ndarray,
                           min_side: int = 256) -> Path:
    """Blend and write; small inputs are enlarged by pixel repetition to ``min_side``."""
    path = Path(path)
    rgb = attention_blend(frame, attention)
    rep = max(1, -(-min_side // min(rgb.shape[:2])))
    rgb = rgb.repeat(rep, axis=0).repeat(rep, axis=1)
    if path.suffix == ".pgm":
        # PGM carries no colour; keep the blend in luminance
        atomic_write_bytes(path, encode_pgm(rgb @ np.array([0.299, 0.587, 0.114])))
        return path
    buf = io.BytesIO()
    plt.imsave(buf, rgb, format="png")
    atomic_write_bytes(path, buf.getvalue())
    return path


def save_tube_overlay(path: str | Path, frames: np.ndarray, boxes: Sequence[Box],
                      gt_boxes: Sequence[Box] | None = None, max_cols: int = 6) -> Path:
    """Contact sheet of frames with the tube box (red) and ground truth (green)."""
    path = Path(path)
    T = len(frames)
    cols = min(T, max_cols)
    rows = (T + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(1.8 * cols, 1.8 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for t in range(T):
        ax = axes[t // cols, t % cols]
        ax.imshow(frames[t], cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        b = boxes[t]
        ax.add_patch(Rectangle((b.x_min - 0.5, b.y_min - 0.5), b.width, b.height,
                               fill=False, edgecolor="red", linewidth=1.2))
        if gt_boxes is not None and gt_boxes[t] is not None:
            g = gt_boxes[t]
            ax.add_patch(Rectangle((g.x_min - 0.5, g.y_min - 0.5), g.width, g.height,
                                   fill=False, edgecolor="lime", linewidth=1.0, linestyle="--"))
        ax.set_title(f"t={t}", fontsize=7)
    _save_fig(fig, path)
    return path


def save_accuracy_curve(path: str | Path, accuracies: Sequence[float], ratios: Sequence[float],
                        baseline: float | None = None) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    it = np.arange(1, len(accuracies) + 1)
    ax.plot(it, accuracies, marker="o", color="C0")
    for i, r in zip(it, ratios):
        ax.annotate(f"R={r:.3g}", (i, accuracies[i - 1]), textcoords="offset points",
                    xytext=(0, 6), ha="center", fontsize=7)
    if baseline is not None:
        ax.axhline(baseline, color="grey", linestyle=":", label="whole frame")
        ax.legend(fontsize=7, frameon=False)
    ax.set_xlabel("zoom iteration")
    ax.set_ylabel("dev letter accuracy")
    ax.set_xticks(it)
    ax.spines[["top", "right"]].set_visible(False)
    _save_fig(fig, path)
    return path


def save_bench_plot(path: str | Path, ratios: Sequence[float], zoom_bytes: Sequence[int],
                    enlarge_bytes: Sequence[int]) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    x = np.arange(len(ratios))
    ax.bar(x - 0.2, np.asarray(zoom_bytes) / 2 ** 20, width=0.4, label="zoom")
    ax.bar(x + 0.2, np.asarray(enlarge_bytes) / 2 ** 20, width=0.4, label="enlarge")
    ax.set_xticks(x, [f"{r:.3g}" for r in ratios])
    ax.set_xlabel("zoom ratio R")
    ax.set_ylabel("peak frame memory (MiB)")
    ax.legend(fontsize=7, frameon=False)
    ax.spines[["top", "right"]].set_visible(False)
    _save_fig(fig, path)
    return path
