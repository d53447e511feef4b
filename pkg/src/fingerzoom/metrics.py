"""Letter accuracy and detection quality."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .imaging import Box, intersection_area, iou


@dataclass(frozen=True)
class EditAlignment:
    substitutions: int
    deletions: int
    insertions: int
    ref_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def align(hyp: Sequence, ref: Sequence) -> EditAlignment:
    """Unit-cost minimum edit alignment; on equal cost prefers a substitution
    over an insertion/deletion pair."""
    n, m = len(ref), len(hyp)
    # cost[i][j] = (errors, -subs) so ties favour substitutions
    cost = [[(0, 0, 0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = (i, 0, i, 0)
    for j in range(1, m + 1):
        cost[0][j] = (j, 0, 0, j)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            e, s, d, ins = cost[i - 1][j - 1]
            same = ref[i - 1] == hyp[j - 1]
            diag = (e + (0 if same else 1), s + (0 if same else 1), d, ins)
            e, s, d, ins = cost[i - 1][j]
            dele = (e + 1, s, d + 1, ins)
            e, s, d, ins = cost[i][j - 1]
            inse = (e + 1, s, d, ins + 1)
            cost[i][j] = min((diag, dele, inse), key=lambda c: (c[0], -c[1]))
    _, s, d, ins = cost[n][m]
    return EditAlignment(s, d, ins, n)


def letter_accuracy(hyp: Sequence, ref: Sequence) -> float:
    """1 - (S + D + I) / N; negative when there are many insertions."""
    if len(ref) == 0:
        raise ValueError("reference must be non-empty")
    a = align(hyp, ref)
    return 1.0 - a.errors / a.ref_length


def corpus_letter_accuracy(pairs: Iterable[tuple[Sequence, Sequence]]) -> float:
    """Accuracy with errors and reference lengths pooled over the corpus."""
    errors = 0
    total = 0
    for hyp, ref in pairs:
        if len(ref) == 0:
            raise ValueError("reference must be non-empty")
        a = align(hyp, ref)
        errors += a.errors
        total += a.ref_length
    if total == 0:
        raise ValueError("empty corpus")
    return 1.0 - errors / total


@dataclass(frozen=True)
class DetectionReport:
    avg_iou: float
    miss_rate: float
    frames: int


def miss_rate(pred: Box, gt: Box) -> float:
    return 1.0 - intersection_area(pred, gt) / gt.area


def detection_eval(pred: Sequence[Box | None], gt: Sequence[Box | None]) -> DetectionReport:
    """Average IoU and miss rate over frames that have both boxes."""
    if len(pred) != len(gt):
        raise ValueError(f"{len(pred)} predicted boxes vs {len(gt)} ground-truth boxes")
    ious, misses = [], []
    for p, g in zip(pred, gt):
        if p is None or g is None:
            continue
        ious.append(iou(p, g))
        misses.append(miss_rate(p, g))
    if not ious:
        raise ValueError("no frames with both a prediction and ground truth")
    return DetectionReport(float(np.mean(ious)), float(np.mean(misses)), len(ious))
