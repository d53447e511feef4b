"""Iterative attention: train, find attention tubes, zoom from the originals, repeat."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .ctc import Alphabet, UnalignableError, greedy_decode, min_frames
from .imaging import Box, box_average, compose_box, crop_resize, sequence_priors
from .lm_decode import CharNGramLM, beam_decode
from .metrics import DetectionReport, corpus_letter_accuracy, detection_eval
from .model import (ModelConfig, ModelParams, encode_checkpoint, forward_sequence, init_params,
                    loss_and_grads, save_checkpoint, sgd_step)
from .storage import write_json
from .synthdata import LabeledSequence
from .tube import OverZoomError, Tube, ZoomSchedule, attention_tube, write_tube

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    lr_schedule: tuple[tuple[float, int], ...] = ((0.01, 20), (0.001, 10))
    batch_size: int = 1
    seed: int = 0
    clip_norm: float | None = 5.0
    learn_alpha: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.lr_schedule or any(n < 0 for _, n in self.lr_schedule) or self.epochs < 1:
            raise ValueError("lr_schedule needs at least one epoch")

    @property
    def epochs(self) -> int:
        return sum(n for _, n in self.lr_schedule)

    def lr_at(self, epoch: int) -> float:
        for lr, n in self.lr_schedule:
            if epoch < n:
                return lr
            epoch -= n
        return self.lr_schedule[-1][0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["model"] = ModelConfig.from_dict(d["model"])
        d["lr_schedule"] = tuple(tuple(x) for x in d["lr_schedule"])
        return cls(**d)


@dataclass(frozen=True)
class ZoomConfig:
    top_k: int = 3
    lam: float = 0.1
    per_frame: bool = False
    square: bool = False


@dataclass
class Sample:
    """One sequence as seen by a model: current input frames plus the boxes
    (in original coordinates) they were cropped from."""
    id: str
    label: str
    target: tuple[int, ...]
    originals: np.ndarray
    frames: np.ndarray
    priors: np.ndarray
    crop: list[Box]
    gt_boxes: np.ndarray | None = None


def _crop_all(originals: np.ndarray, crops: Sequence[Box], side: int) -> np.ndarray:
    if all(c == crops[0] for c in crops):
        return crop_resize(originals, crops[0], side)
    return np.stack([crop_resize(f, c, side) for f, c in zip(originals, crops)])


def make_sample(seq: LabeledSequence, alphabet: Alphabet, config: ModelConfig,
                crop: Box | Sequence[Box] | None = None) -> Sample:
    T, H, W = seq.frames.shape
    if crop is None:
        crop = Box(0, 0, W, H)
    crops = [crop] * T if isinstance(crop, Box) else list(crop)
    frames = _crop_all(seq.frames, crops, config.input_side)
    return Sample(seq.id, seq.label, alphabet.encode(seq.label), seq.frames, frames,
                  sequence_priors(frames, config.grid), crops, seq.gt_boxes)


def prepare_samples(seqs: Sequence[LabeledSequence], alphabet: Alphabet,
                    config: ModelConfig) -> list[Sample]:
    return [make_sample(s, alphabet, config) for s in seqs]


def fingerprint(samples: Sequence[Sample]) -> str:
    h = hashlib.sha256()
    for s in samples:
        h.update(s.id.encode())
        h.update(np.ascontiguousarray(s.frames, dtype=np.float64).tobytes())
    return h.hexdigest()


def params_hash(params: ModelParams) -> str:
    return hashlib.sha256(encode_checkpoint(params)).hexdigest()


# -- training ---------------------------------------------------------------

def decode_greedy(params: ModelParams, sample: Sample, alphabet: Alphabet) -> str:
    posteriors, _, _ = forward_sequence(params, sample.frames, sample.priors)
    return alphabet.decode(greedy_decode(posteriors))


def evaluate(params: ModelParams, samples: Sequence[Sample], alphabet: Alphabet,
             decoder: Callable[[np.ndarray], str] | None = None) -> tuple[float, list[str]]:
    """Corpus letter accuracy and the hypotheses (greedy unless ``decoder`` given)."""
    hyps = []
    for s in samples:
        posteriors, _, _ = forward_sequence(params, s.frames, s.priors)
        hyps.append(decoder(posteriors) if decoder else alphabet.decode(greedy_decode(posteriors)))
    acc = corpus_letter_accuracy((h, s.label) for h, s in zip(hyps, samples))
    return acc, hyps


@dataclass
class TrainResult:
    params: ModelParams
    dev_accuracy: float
    best_epoch: int
    history: list[dict]


def _clip(grads, max_norm: float | None):
    if max_norm is None:
        return grads
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return grads


def train_model(train: Sequence[Sample], dev: Sequence[Sample], config: TrainConfig,
                alphabet: Alphabet, init: ModelParams | None = None) -> TrainResult:
    """Minibatch SGD on the mean per-sequence CTC loss.  Returns the epoch
    checkpoint with the best dev letter accuracy (greedy decoding)."""
    if not train or not dev:
        raise ValueError("training and dev sets must be non-empty")
    for s in train:
        if min_frames(s.target) > len(s.frames):
            raise UnalignableError(f"sequence {s.id}: label {s.label!r} cannot align to {len(s.frames)} frames")
    params = init if init is not None else init_params(config.model, config.seed)
    frozen = () if config.learn_alpha else ("alpha",)
    dropout_rng = np.random.default_rng([config.seed, 1]) if config.model.dropout > 0 else None
    best = None
    history = []
    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        order = np.random.default_rng([config.seed, 2, epoch]).permutation(len(train))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[start:start + config.batch_size]]
            acc_grads = None
            for s in batch:
                loss, grads = loss_and_grads(params, s.frames, s.priors, s.target, dropout_rng)
                total += loss
                if acc_grads is None:
                    acc_grads = grads
                else:
                    for k in acc_grads:
                        acc_grads[k] += grads[k]
            for g in acc_grads.values():
                g /= len(batch)
            params = sgd_step(params, _clip(acc_grads, config.clip_norm), lr, frozen)
        dev_acc, _ = evaluate(params, dev, alphabet)
        history.append({"epoch": epoch, "lr": lr, "train_loss": total / len(train), "dev_accuracy": dev_acc})
        log.info("epoch %d lr %.4g loss %.4f dev acc %.4f", epoch, lr, total / len(train), dev_acc)
        if best is None or dev_acc > best[0]:
            best = (dev_acc, epoch, params)
    return TrainResult(best[2], best[0], best[1], history)


# -- zooming ----------------------------------------------------------------

@dataclass
class ZoomOutput:
    sample: Sample
    tube: Tube
    frame_boxes: list[Box]   # per-frame tube boxes in original coordinates


def zoom_sample(params: ModelParams, sample: Sample, ratio: float, zoom: ZoomConfig) -> ZoomOutput:
    """Attention tube on the current input, then a fresh crop from the originals."""
    config = params.config
    _, attention, _ = forward_sequence(params, sample.frames, sample.priors)
    side = config.input_side
    tube = attention_tube(attention, ratio, (side, side), zoom.top_k, zoom.lam, zoom.square)
    dims = (side, side)
    frame_boxes = [compose_box(b, c, dims) for b, c in zip(tube.boxes, sample.crop)]
    if zoom.per_frame:
        crops = frame_boxes
    else:
        avg = box_average(tube.boxes)
        crops = [compose_box(avg, c, dims) for c in sample.crop]
    for c in crops:
        if min(c.width, c.height) < 2.0:
            raise OverZoomError(f"sequence {sample.id}: crop {c.as_tuple()} is below 2px on a side")
    frames = _crop_all(sample.originals, crops, side)
    new = Sample(sample.id, sample.label, sample.target, sample.originals, frames,
                 sequence_priors(frames, config.grid), crops, sample.gt_boxes)
    return ZoomOutput(new, tube, frame_boxes)


def _pack_boxes(boxes: Sequence[Box]) -> np.ndarray:
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def zoom_samples(params: ModelParams, samples: Sequence[Sample], ratio: float, zoom: ZoomConfig,
                 cache_dir: Path | None = None) -> list[ZoomOutput]:
    """zoom_sample over a split, cached on disk by (model, zoom settings, ratio, inputs)."""
    key = None
    if cache_dir is not None:
        h = hashlib.sha256()
        h.update(params_hash(params).encode())
        h.update(json.dumps([asdict(zoom), repr(float(ratio))]).encode())
        h.update(fingerprint(samples).encode())
        key = Path(cache_dir) / f"{h.hexdigest()[:32]}.npz"
        if key.exists():
            return _load_zoom_cache(key, params, samples)
    outs = [zoom_sample(params, s, ratio, zoom) for s in samples]
    if key is not None:
        key.parent.mkdir(parents=True, exist_ok=True)
        arrays = {}
        for i, o in enumerate(outs):
            arrays[f"crop{i}"] = _pack_boxes(o.sample.crop)
            arrays[f"tube{i}"] = _pack_boxes(o.tube.boxes)
            arrays[f"frame{i}"] = _pack_boxes(o.frame_boxes)
            arrays[f"score{i}"] = np.array(o.tube.scores)
            arrays[f"index{i}"] = np.array(o.tube.indices)
            arrays[f"obj{i}"] = np.array(o.tube.objective)
        tmp = key.with_suffix(".tmp.npz")
        np.savez(tmp, **arrays)
        tmp.replace(key)
    return outs


def _load_zoom_cache(path: Path, params: ModelParams, samples: Sequence[Sample]) -> list[ZoomOutput]:
    from .imaging import array_to_boxes
    config = params.config
    data = np.load(path)
    outs = []
    for i, s in enumerate(samples):
        crops = array_to_boxes(data[f"crop{i}"])
        frames = _crop_all(s.originals, crops, config.input_side)
        new = Sample(s.id, s.label, s.target, s.originals, frames,
                     sequence_priors(frames, config.grid), crops, s.gt_boxes)
        tube = Tube(array_to_boxes(data[f"tube{i}"]), data[f"score{i}"].tolist(),
                    data[f"index{i}"].tolist(), float(data[f"obj{i}"]))
        outs.append(ZoomOutput(new, tube, array_to_boxes(data[f"frame{i}"])))
    return outs


def detection_report(outs: Sequence[ZoomOutput]) -> DetectionReport | None:
    """Crop boxes (what the next model sees) against ground truth."""
    pred, gt = [], []
    for o in outs:
        if o.sample.gt_boxes is None:
            continue
        pred.extend(o.sample.crop)
        gt.extend(Box(*row) for row in o.sample.gt_boxes)
    if not pred:
        return None
    return detection_eval(pred, gt)


def glyph_area_fraction(sample: Sample) -> float:
    """Median over frames of (ground-truth area inside the crop) / (crop area)."""
    from .imaging import intersection_area
    vals = []
    for crop, row in zip(sample.crop, sample.gt_boxes):
        vals.append(intersection_area(crop, Box(*row)) / crop.area)
    return float(np.median(vals))


# -- Algorithm: iterative training / inference --------------------------------

@dataclass
class IterationRecord:
    index: int
    params: ModelParams
    ratio: float
    dev_accuracy: float
    fingerprint: str
    train_result: TrainResult
    detection: DetectionReport | None = None
    dev_inputs: list[Sample] = field(default_factory=list, repr=False)
    next_dev: list[ZoomOutput] = field(default_factory=list, repr=False)

    def metrics(self, perplexity: float | None = None) -> dict:
        return {
            "iteration": self.index,
            "zoom_ratio": self.ratio,
            "letter_accuracy": self.dev_accuracy,
            "avg_iou": self.detection.avg_iou if self.detection else None,
            "miss_rate": self.detection.miss_rate if self.detection else None,
            "perplexity": perplexity,
            "best_epoch": self.train_result.best_epoch,
            "input_fingerprint": self.fingerprint,
        }


@dataclass
class IterationArtifacts:
    iterations: list[IterationRecord]      # up to the best dev iteration
    trained: list[IterationRecord]         # every iteration that was trained

    @property
    def models(self) -> list[ModelParams]:
        return [r.params for r in self.iterations]

    @property
    def ratios(self) -> list[float]:
        return [r.ratio for r in self.iterations]


def iterative_train(train: Sequence[LabeledSequence], dev: Sequence[LabeledSequence],
                    schedule: ZoomSchedule, config: TrainConfig, alphabet: Alphabet,
                    zoom: ZoomConfig = ZoomConfig(), run_dir: str | Path | None = None,
                    early_stop: bool = True, lm: CharNGramLM | None = None,
                    dev_perplexity: float | None = None) -> IterationArtifacts:
    """Train H_1 on whole frames; each H_s's attention tubes (ratio R_s) give
    the crops, taken from the original frames, that H_{s+1} trains on.

    Stops once dev accuracy drops below the best so far (``early_stop``) and
    returns the iterations up to the best one; all trained ones are recorded.
    """
    run = Path(run_dir) if run_dir is not None else None
    if run is not None:
        write_json(run / "config.json", {
            "train": config.to_dict(), "zoom": asdict(zoom), "schedule": list(schedule.ratios),
            "alphabet": str(alphabet)})
    cur_train = prepare_samples(train, alphabet, config.model)
    cur_dev = prepare_samples(dev, alphabet, config.model)
    records: list[IterationRecord] = []
    for s, ratio in enumerate(schedule.ratios, 1):
        fp = fingerprint(cur_train + cur_dev)
        result = train_model(cur_train, cur_dev, config, alphabet)
        cache = run / "cache" if run is not None else None
        next_train = zoom_samples(result.params, cur_train, ratio, zoom, cache)
        next_dev = zoom_samples(result.params, cur_dev, ratio, zoom, cache)
        rec = IterationRecord(s, result.params, ratio, result.dev_accuracy, fp, result,
                              detection_report(next_dev), cur_dev, next_dev)
        records.append(rec)
        log.info("iteration %d (R=%.4f): dev accuracy %.4f", s, ratio, rec.dev_accuracy)
        if run is not None:
            _write_iteration(run / f"iter_{s}", rec, dev_perplexity)
        if early_stop and s > 1 and rec.dev_accuracy < max(r.dev_accuracy for r in records[:-1]):
            break
        cur_train = [o.sample for o in next_train]
        cur_dev = [o.sample for o in next_dev]
    best = max(range(len(records)), key=lambda i: (records[i].dev_accuracy, -i)) if early_stop else len(records) - 1
    return IterationArtifacts(records[:best + 1], records)


def _write_iteration(path: Path, rec: IterationRecord, perplexity: float | None) -> None:
    path.mkdir(parents=True, exist_ok=True)
    save_checkpoint(path / "checkpoint.fsia", rec.params)
    for o in rec.next_dev:
        write_tube(path / "tubes" / f"{o.sample.id}.txt", o.frame_boxes, o.tube.scores)
    write_json(path / "metrics.json", rec.metrics(perplexity))


def zoom_chain(models: Sequence[ModelParams], ratios: Sequence[float], sample: Sample,
               zoom: ZoomConfig = ZoomConfig()) -> Sample:
    """Run H_1..H_{S-1} to produce the input that H_S decodes."""
    for params, ratio in zip(models[:-1], ratios):
        sample = zoom_sample(params, sample, ratio, zoom).sample
    return sample


def iterative_infer(models: Sequence[ModelParams], ratios: Sequence[float], seq: LabeledSequence | np.ndarray,
                    alphabet: Alphabet, zoom: ZoomConfig = ZoomConfig(), lm: CharNGramLM | None = None,
                    beam_width: int = 16, lm_weight: float = 0.4, insertion_bias: float = 0.0,
                    greedy: bool = False) -> str:
    """Decode one original-resolution sequence with the last model."""
    if not models:
        raise ValueError("need at least one model")
    if isinstance(seq, np.ndarray):
        seq = LabeledSequence("input", seq, alphabet.letters[0], np.zeros((len(seq), 4)))
    first = make_sample(seq, alphabet, models[0].config)
    sample = zoom_chain(models, ratios, first, zoom)
    posteriors, _, _ = forward_sequence(models[-1], sample.frames, sample.priors)
    if greedy:
        return alphabet.decode(greedy_decode(posteriors))
    return beam_decode(posteriors, alphabet, lm, beam_width, lm_weight, insertion_bias)


# -- zoom ratio schedule search --------------------------------------------

@dataclass
class ScheduleNode:
    prefix: tuple[float, ...]
    dev_accuracy: float
    params: ModelParams = field(repr=False)
    train: list[Sample] = field(repr=False)
    dev: list[Sample] = field(repr=False)


@dataclass
class ScheduleSearchResult:
    schedule: ZoomSchedule
    dev_accuracy: float
    baseline_accuracy: float
    explored: list[tuple[tuple[float, ...], float]]


def search_zoom_schedule(train: Sequence[LabeledSequence], dev: Sequence[LabeledSequence],
                         config: TrainConfig, alphabet: Alphabet,
                         ratios: Sequence[float] = (0.9, 0.9 ** 2, 0.9 ** 3, 0.9 ** 4),
                         beam: int = 2, max_steps: int = 2,
                         zoom: ZoomConfig = ZoomConfig()) -> ScheduleSearchResult:
    """Level-wise beam search over ratio sequences.

    A prefix (R_1..R_k) is scored by the dev accuracy of a model trained from
    scratch on inputs obtained by zooming k times with those ratios.
    """
    if not ratios:
        raise ValueError("ratio set must be non-empty")
    if beam < 1 or max_steps < 1:
        raise ValueError("beam and max_steps must be >= 1")
    tr = prepare_samples(train, alphabet, config.model)
    dv = prepare_samples(dev, alphabet, config.model)
    base = train_model(tr, dv, config, alphabet)
    frontier = [ScheduleNode((), base.dev_accuracy, base.params, tr, dv)]
    explored: list[ScheduleNode] = []
    for _level in range(max_steps):
        children = []
        for node in frontier:
            for r in ratios:
                try:
                    ztr = [o.sample for o in zoom_samples(node.params, node.train, r, zoom)]
                    zdv = [o.sample for o in zoom_samples(node.params, node.dev, r, zoom)]
                except OverZoomError:
                    continue
                res = train_model(ztr, zdv, config, alphabet)
                child = ScheduleNode(node.prefix + (r,), res.dev_accuracy, res.params, ztr, zdv)
                log.info("schedule %s: dev accuracy %.4f", child.prefix, child.dev_accuracy)
                children.append(child)
        if not children:
            break
        explored.extend(children)
        children.sort(key=lambda n: -n.dev_accuracy)  # stable: ties keep expansion order
        frontier = children[:beam]
    if not explored:
        raise OverZoomError("every candidate ratio over-zoomed")
    best = max(explored, key=lambda n: n.dev_accuracy)
    return ScheduleSearchResult(ZoomSchedule(best.prefix), best.dev_accuracy, base.dev_accuracy,
                                [(n.prefix, n.dev_accuracy) for n in explored])
