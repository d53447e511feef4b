"""Desk-scale zoom-vs-whole-frame comparison on the synthetic task."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ctc import Alphabet
from .model import ModelConfig
from .pipeline import TrainConfig, ZoomConfig, glyph_area_fraction, iterative_train
from .synthdata import SynthSpec, make_split
from .tube import ZoomSchedule

# Settings used by the acceptance run: whole frames are shown to the model at
# half resolution (112 -> 56), so a glyph covering ~10% of the frame spans
# about 17 input pixels until a zoom brings it closer.
TREND_RATIO = 0.5
TREND_INPUT_SIDE = 56
TREND_LR_SCHEDULE = ((0.1, 25), (0.01, 10))


@dataclass(frozen=True)
class TrendResult:
    seed: int
    whole_frame_accuracy: float
    zoom_accuracy: float
    whole_frame_glyph_fraction: float    # median over dev
    zoom_glyph_fraction: float
    seconds: float


def trend_run(seed: int, n_train: int = 200, n_dev: int = 50, ratio: float = TREND_RATIO,
              input_side: int = TREND_INPUT_SIDE,
              lr_schedule: tuple = TREND_LR_SCHEDULE) -> TrendResult:
    """Train H_1 on whole frames and H_2 on the frames H_1's tubes zoom into."""
    start = time.perf_counter()
    spec = SynthSpec(frame_side=112, glyph_fraction=0.1)
    alphabet = Alphabet.from_string(spec.alphabet)
    train = make_split(spec, n_train, 10 * seed + 1, "tr")
    dev = make_split(spec, n_dev, 10 * seed + 2, "dv")
    config = TrainConfig(model=ModelConfig(input_side=input_side, num_labels=alphabet.size),
                         lr_schedule=lr_schedule, seed=seed)
    # the second ratio only drives the (unused) zoom after H_2
    arts = iterative_train(train, dev, ZoomSchedule((ratio, ratio)), config, alphabet,
                           ZoomConfig(), early_stop=False)
    first, second = arts.trained
    return TrendResult(
        seed, first.dev_accuracy, second.dev_accuracy,
        float(np.median([glyph_area_fraction(s) for s in first.dev_inputs])),
        float(np.median([glyph_area_fraction(s) for s in second.dev_inputs])),
        time.perf_counter() - start)


def trend_runs(seeds=(0, 1, 2), workers: int | None = None, **kwargs) -> list[TrendResult]:
    workers = workers or min(len(seeds), os.cpu_count() or 1)
    if workers <= 1:
        return [trend_run(s, **kwargs) for s in seeds]
    with ProcessPoolExecutor(workers) as pool:
        futures = [pool.submit(trend_run, s, **kwargs) for s in seeds]
        return [f.result() for f in futures]
