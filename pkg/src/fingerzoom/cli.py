"""Command-line entry point: ``fingerzoom <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .ctc import Alphabet, UnalignableError, greedy_decode
from .imaging import InvalidTubeError, array_to_boxes, sequence_priors
from .lm_decode import CharNGramLM, beam_decode, perplexity, train_ngram
from .metrics import corpus_letter_accuracy, detection_eval
from .model import (TINY_CONFIG, ConvLayer, ModelConfig, ModelNumericsError, finite_diff_check,
                    forward_sequence, init_params, load_checkpoint, save_checkpoint)
from .pipeline import (TrainConfig, ZoomConfig, iterative_train, make_sample, prepare_samples,
                       search_zoom_schedule, train_model, zoom_chain, zoom_sample)
from .storage import atomic_write_text, write_json
from .synthdata import DatasetError, SynthSpec, load_dataset, make_split, save_dataset
from .tube import DEFAULT_RATIOS, ZoomSchedule, parse_tube

log = logging.getLogger("fingerzoom")

TOL_GRADCHECK = 1e-3


class CliError(Exception):
    """A user-facing failure reported as a one-line diagnostic."""


# -- argument helpers -------------------------------------------------------

def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _lr_schedule(text: str) -> tuple[tuple[float, int], ...]:
    """``0.01:20,0.001:10`` -> ((0.01, 20), (0.001, 10))."""
    try:
        phases = []
        for part in text.split(","):
            lr, n = part.split(":")
            phases.append((float(lr), int(n)))
        return tuple(phases)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lr:epochs[,lr:epochs...], got {text!r}") from None


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and training")
    g.add_argument("--input-side", type=int, default=56, help="model input side in pixels")
    g.add_argument("--conv", default="8,16,32", help="channels of the stride-2 conv layers")
    g.add_argument("--attention-dim", type=int, default=32)
    g.add_argument("--hidden", type=int, default=64)
    g.add_argument("--alpha", type=float, default=1.0, help="motion prior exponent")
    g.add_argument("--learn-alpha", action="store_true")
    g.add_argument("--dropout", type=float, default=0.0)
    g.add_argument("--lr-schedule", type=_lr_schedule, default=((0.01, 20), (0.001, 10)))
    g.add_argument("--epochs", type=int, help="shorthand: run the first learning rate for N epochs")
    g.add_argument("--batch-size", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alphabet", help="letters in label order (default: from the data)")


def _add_zoom_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("attention tubes")
    g.add_argument("--top-k", type=int, default=3, help="candidate peaks per frame")
    g.add_argument("--lambda", dest="lam", type=float, default=0.1, help="IoU smoothness weight")
    g.add_argument("--per-frame", action="store_true", help="crop each frame with its own box")
    g.add_argument("--square", action="store_true", help="square candidate boxes")


def _add_decode_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("decoding")
    g.add_argument("--lm", type=Path, help="character n-gram file from lm-train")
    g.add_argument("--beam-width", type=int, default=16)
    g.add_argument("--lm-weight", type=float, default=0.4)
    g.add_argument("--insertion-bias", type=float, default=0.0)
    g.add_argument("--greedy", action="store_true", help="best-path decoding instead of beam search")


def _zoom_config(args) -> ZoomConfig:
    return ZoomConfig(top_k=args.top_k, lam=args.lam, per_frame=args.per_frame, square=args.square)


def _train_config(args, alphabet: Alphabet) -> TrainConfig:
    channels = [int(c) for c in args.conv.split(",")]
    model = ModelConfig(input_side=args.input_side, conv=tuple(ConvLayer(c) for c in channels),
                        attention_dim=args.attention_dim, hidden=args.hidden,
                        num_labels=alphabet.size, alpha=args.alpha, dropout=args.dropout)
    schedule = args.lr_schedule
    if args.epochs is not None:
        schedule = ((schedule[0][0], args.epochs),)
    return TrainConfig(model=model, lr_schedule=schedule, batch_size=args.batch_size,
                       seed=args.seed, learn_alpha=args.learn_alpha)


def _alphabet(args, *splits) -> Alphabet:
    if args.alphabet:
        return Alphabet.from_string(args.alphabet)
    letters = sorted({c for split in splits for seq in split for c in seq.label})
    return Alphabet.from_string("".join(letters))


def _load_lm(path: Path | None) -> CharNGramLM | None:
    return CharNGramLM.load(path) if path is not None else None


def _dev_perplexity(lm: CharNGramLM | None, labels) -> float | None:
    return perplexity(lm, labels) if lm is not None else None


def _write_hyps(path: Path, rows) -> None:
    atomic_write_text(path, "".join(f"{i}\t{h}\t{r}\n" for i, h, r in rows))


def _metrics(acc=None, avg_iou=None, miss=None, ppl=None, **extra) -> dict:
    d = {"letter_accuracy": acc, "avg_iou": avg_iou, "miss_rate": miss, "perplexity": ppl}
    d.update(extra)
    return d


# -- run directories --------------------------------------------------------

def load_run(run: Path) -> tuple[list, list[float], Alphabet, ZoomConfig]:
    """Models, inter-model ratios, alphabet and tube settings of a run directory."""
    cfg_path, sched_path = run / "config.json", run / "schedule.json"
    if not cfg_path.exists() or not sched_path.exists():
        raise CliError(f"{run} is not a run directory (config.json/schedule.json missing)")
    cfg = json.loads(cfg_path.read_text())
    sched = json.loads(sched_path.read_text())
    n = int(sched["iterations"])
    models = []
    for s in range(1, n + 1):
        ckpt = run / f"iter_{s}" / "checkpoint.fsia"
        if not ckpt.exists():
            raise CliError(f"missing checkpoint {ckpt}")
        models.append(load_checkpoint(ckpt))
    zoom = ZoomConfig(**cfg.get("zoom", {}))
    return models, [float(r) for r in sched["schedule"][:n - 1]], Alphabet.from_string(cfg["alphabet"]), zoom


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SynthSpec(alphabet=args.alphabet, frame_side=args.frame_side,
                     glyph_fraction=args.glyph_fraction,
                     frames_per_letter=(args.min_frames, args.max_frames),
                     distractor_count=args.distractors, jitter=args.jitter, blur=args.blur,
                     noise=args.noise)
    seqs = make_split(spec, args.count, args.seed, args.prefix)
    save_dataset(args.out, seqs)
    print(f"wrote {len(seqs)} sequences to {args.out}")
    return 0


def cmd_train(args) -> int:
    train, dev = load_dataset(args.train), load_dataset(args.dev)
    alphabet = _alphabet(args, train, dev)
    config = _train_config(args, alphabet)
    lm = _load_lm(args.lm)
    run = Path(args.out)
    write_json(run / "config.json", {"train": config.to_dict(), "zoom": {}, "schedule": [],
                                     "alphabet": str(alphabet)})
    tr = prepare_samples(train, alphabet, config.model)
    dv = prepare_samples(dev, alphabet, config.model)
    result = train_model(tr, dv, config, alphabet)
    save_checkpoint(run / "iter_1" / "checkpoint.fsia", result.params)
    metrics = _metrics(result.dev_accuracy, ppl=_dev_perplexity(lm, [s.label for s in dev]),
                       best_epoch=result.best_epoch)
    write_json(run / "iter_1" / "metrics.json", metrics)
    write_json(run / "history.json", result.history)
    write_json(run / "schedule.json", {"schedule": [], "iterations": 1})
    print(f"dev letter accuracy {result.dev_accuracy:.4f} (epoch {result.best_epoch})")
    return 0


def _resolve_schedule(ratios: Sequence[float], iters: int | None) -> ZoomSchedule:
    ratios = tuple(ratios)
    if iters is not None:
        if iters < 1:
            raise CliError("--iters must be >= 1")
        if len(ratios) == 1:
            ratios = ratios * iters
        elif len(ratios) < iters:
            raise CliError(f"--iters {iters} needs {iters} ratios, got {len(ratios)}")
        else:
            ratios = ratios[:iters]
    return ZoomSchedule(ratios)


def cmd_zoom_train(args) -> int:
    train, dev = load_dataset(args.train), load_dataset(args.dev)
    alphabet = _alphabet(args, train, dev)
    config = _train_config(args, alphabet)
    schedule = _resolve_schedule(args.zoom_ratios, args.iters)
    lm = _load_lm(args.lm)
    run = Path(args.out)
    arts = iterative_train(train, dev, schedule, config, alphabet, _zoom_config(args), run,
                           early_stop=not args.no_early_stop, lm=lm,
                           dev_perplexity=_dev_perplexity(lm, [s.label for s in dev]))
    kept = arts.iterations
    write_json(run / "schedule.json", {
        "schedule": [r.ratio for r in kept], "iterations": len(kept),
        "dev_accuracy": [r.dev_accuracy for r in arts.trained]})
    for r in arts.trained:
        print(f"iteration {r.index} R={r.ratio:.4g} dev letter accuracy {r.dev_accuracy:.4f}")
    print(f"kept {len(kept)} iteration(s)")
    return 0


def cmd_schedule_search(args) -> int:
    train, dev = load_dataset(args.train), load_dataset(args.dev)
    alphabet = _alphabet(args, train, dev)
    config = _train_config(args, alphabet)
    res = search_zoom_schedule(train, dev, config, alphabet, args.zoom_ratios, args.beam,
                               args.iters, _zoom_config(args))
    out = Path(args.out)
    write_json(out / "schedule.json", {
        "schedule": list(res.schedule.ratios), "dev_accuracy": res.dev_accuracy,
        "baseline_accuracy": res.baseline_accuracy,
        "explored": [{"prefix": list(p), "dev_accuracy": a} for p, a in res.explored]})
    print(f"best schedule {','.join(f'{r:.6g}' for r in res.schedule.ratios)} "
          f"dev letter accuracy {res.dev_accuracy:.4f} (whole frame {res.baseline_accuracy:.4f})")
    return 0


def _decode_rows(models, ratios, alphabet, zoom, seqs, args):
    lm = _load_lm(args.lm)
    rows = []
    for seq in seqs:
        sample = zoom_chain(models, ratios, make_sample(seq, alphabet, models[0].config), zoom)
        post, _, _ = forward_sequence(models[-1], sample.frames, sample.priors)
        if args.greedy:
            hyp = alphabet.decode(greedy_decode(post))
        else:
            hyp = beam_decode(post, alphabet, lm, args.beam_width, args.lm_weight, args.insertion_bias)
        rows.append((seq.id, hyp, seq.label))
    return rows, lm


def cmd_decode(args) -> int:
    models, ratios, alphabet, zoom = load_run(Path(args.run))
    seqs = load_dataset(args.data)
    rows, lm = _decode_rows(models, ratios, alphabet, zoom, seqs, args)
    if args.out:
        _write_hyps(Path(args.out), rows)
    else:
        sys.stdout.write("".join(f"{i}\t{h}\t{r}\n" for i, h, r in rows))
    if args.metrics:
        acc = corpus_letter_accuracy((h, r) for _, h, r in rows)
        write_json(Path(args.metrics), _metrics(acc, ppl=_dev_perplexity(lm, [r for _, _, r in rows])))
    return 0


def read_hyps(path: Path) -> list[tuple[str, str, str]]:
    rows = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CliError(f"{path}:{n}: expected id<TAB>hyp<TAB>ref")
        rows.append(tuple(parts))
    return rows


def cmd_eval(args) -> int:
    rows = read_hyps(args.hyps)
    if not rows:
        raise CliError(f"{args.hyps}: no hypotheses")
    acc = corpus_letter_accuracy((h, r) for _, h, r in rows)
    lm = _load_lm(args.lm)
    ppl = _dev_perplexity(lm, [r for _, _, r in rows])
    if args.out:
        write_json(Path(args.out), _metrics(acc, ppl=ppl, sequences=len(rows)))
    print(f"letter_accuracy\t{acc:.6f}")
    if ppl is not None:
        print(f"perplexity\t{ppl:.6f}")
    return 0


def cmd_detect_eval(args) -> int:
    seqs = load_dataset(args.data)
    tubes = Path(args.tubes)
    pred, gt = [], []
    found = 0
    for seq in seqs:
        f = tubes / f"{seq.id}.txt"
        if not f.exists():
            continue
        boxes, _ = parse_tube(f.read_text())
        if len(boxes) != len(seq.frames):
            raise CliError(f"{f}: {len(boxes)} boxes for {len(seq.frames)} frames")
        pred.extend(boxes)
        gt.extend(array_to_boxes(seq.gt_boxes))
        found += 1
    if not found:
        raise CliError(f"no tube files in {tubes} match sequences in {args.data}")
    rep = detection_eval(pred, gt)
    if args.out:
        write_json(Path(args.out), _metrics(avg_iou=rep.avg_iou, miss=rep.miss_rate, frames=rep.frames))
    print(f"avg_iou\t{rep.avg_iou:.6f}\nmiss_rate\t{rep.miss_rate:.6f}\nframes\t{rep.frames}")
    return 0


def cmd_lm_train(args) -> int:
    if args.data:
        corpus = [s.label for s in load_dataset(args.data, verify=False)]
    else:
        corpus = [w.strip() for w in Path(args.text).read_text().split() if w.strip()]
    letters = list(args.alphabet) if args.alphabet else None
    lm = train_ngram(corpus, args.order, letters)
    lm.save(args.out)
    msg = f"{args.order}-gram over {len(lm.letters)} letters from {len(corpus)} words"
    if args.dev:
        msg += f"; dev perplexity {perplexity(lm, [s.label for s in load_dataset(args.dev, verify=False)]):.4f}"
    print(msg)
    return 0


def cmd_gradcheck(args) -> int:
    params = init_params(TINY_CONFIG, args.seed)
    rng = np.random.default_rng(args.seed + 1)
    frames = rng.random((args.frames, TINY_CONFIG.input_side, TINY_CONFIG.input_side))
    priors = sequence_priors(frames, TINY_CONFIG.grid)
    target = tuple(int(v) for v in rng.integers(1, TINY_CONFIG.num_labels, size=max(1, args.frames // 2)))
    corrupt = None
    if args.corrupt:
        name, _, idx = args.corrupt.partition(":")
        corrupt = (name, int(idx or 0))
    err = finite_diff_check(params, frames, priors, target, corrupt=corrupt)
    ok = err < TOL_GRADCHECK
    print(f"max relative error {err:.3e} ({'ok' if ok else 'FAILED'}, tolerance {TOL_GRADCHECK:g})")
    return 0 if ok else 1


def cmd_bench(args) -> int:
    from .bench import zoom_vs_enlarge
    from .plotting import save_bench_plot

    results = [zoom_vs_enlarge(r, args.frame_side, args.input_side, args.frames, args.seed)
               for r in args.zoom_ratios]
    out = Path(args.out)
    header = "ratio\tzoom_peak_bytes\tenlarge_peak_bytes\tmeasured_ratio\texpected_ratio"
    lines = [header] + [f"{b.ratio:.6g}\t{b.zoom_peak_bytes}\t{b.enlarge_peak_bytes}\t"
                        f"{b.measured_ratio:.6f}\t{b.expected_ratio:.6f}" for b in results]
    atomic_write_text(out / "bench.tsv", "\n".join(lines) + "\n")
    write_json(out / "bench.json", [b.to_dict() for b in results])
    save_bench_plot(out / "bench.png", [b.ratio for b in results],
                    [b.zoom_peak_bytes for b in results], [b.enlarge_peak_bytes for b in results])
    print("\n".join(lines))
    return 0


def cmd_viz(args) -> int:
    from .plotting import save_accuracy_curve, save_attention_overlay, save_tube_overlay

    run = Path(args.run)
    models, ratios, alphabet, zoom = load_run(run)
    seqs = load_dataset(args.data)
    if args.id:
        seqs = [s for s in seqs if s.id in set(args.id)]
        if not seqs:
            raise CliError(f"no sequence with id {', '.join(args.id)}")
    else:
        seqs = seqs[:args.count]
    out = Path(args.out)
    ext = "." + args.format
    written = 0
    metrics = [run / f"iter_{s}" / "metrics.json" for s in range(1, len(models) + 1)]
    # each iteration's own tube ratio; whole-frame runs have none
    tube_ratios = [json.loads(m.read_text()).get("zoom_ratio") if m.exists() else None for m in metrics]
    for seq in seqs:
        sample = make_sample(seq, alphabet, models[0].config)
        for s, params in enumerate(models, 1):
            _, attention, _ = forward_sequence(params, sample.frames, sample.priors)
            for t in range(len(sample.frames)):
                save_attention_overlay(out / seq.id / f"iter_{s}" / f"attn_{t:04d}{ext}",
                                       sample.frames[t], attention[t])
                written += 1
            if tube_ratios[s - 1] is None:
                break
            z = zoom_sample(params, sample, tube_ratios[s - 1], zoom)
            if args.format == "png":
                save_tube_overlay(out / seq.id / f"iter_{s}" / "tube.png", seq.frames,
                                  z.frame_boxes, array_to_boxes(seq.gt_boxes))
                written += 1
            sample = z.sample
    if args.format == "png" and all(m.exists() for m in metrics):
        accs = [json.loads(m.read_text())["letter_accuracy"] for m in metrics]
        save_accuracy_curve(out / "accuracy.png", accs, [r if r is not None else float("nan") for r in tube_ratios])
        written += 1
    print(f"wrote {written} images to {out}")
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fingerzoom",
                                     description="Iterative attention zooming for glyph-sequence recognition.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset split")
    p.add_argument("out", type=Path)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefix", default="seq")
    p.add_argument("--alphabet", default="abcdefgh")
    p.add_argument("--frame-side", type=int, default=112)
    p.add_argument("--glyph-fraction", type=float, default=0.1)
    p.add_argument("--min-frames", type=int, default=2, help="frames per letter, lower bound")
    p.add_argument("--max-frames", type=int, default=4, help="frames per letter, upper bound")
    p.add_argument("--distractors", type=int, default=3)
    p.add_argument("--jitter", type=int, default=0)
    p.add_argument("--blur", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on whole frames")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--dev", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="run directory")
    p.add_argument("--lm", type=Path, help="n-gram file; adds dev perplexity to metrics.json")
    _add_model_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("zoom-train", help="iterative training with attention zooming")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--dev", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="run directory")
    p.add_argument("--zoom-ratios", type=_float_list, default=(0.9, 0.81), help="R_1,...,R_S")
    p.add_argument("--iters", type=int, help="number of iterations S (repeats a single ratio)")
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--lm", type=Path, help="n-gram file; adds dev perplexity to metrics.json")
    _add_model_args(p)
    _add_zoom_args(p)
    p.set_defaults(func=cmd_zoom_train)

    p = sub.add_parser("schedule-search", help="beam search over zoom-ratio sequences")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--dev", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--zoom-ratios", type=_float_list, default=DEFAULT_RATIOS, help="candidate ratios")
    p.add_argument("--beam", type=int, default=2)
    p.add_argument("--iters", type=int, default=2, help="maximum schedule length")
    _add_model_args(p)
    _add_zoom_args(p)
    p.set_defaults(func=cmd_schedule_search)

    p = sub.add_parser("decode", help="decode a dataset with a trained run")
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, help="hypothesis dump (default stdout)")
    p.add_argument("--metrics", type=Path, help="also write metrics.json here")
    _add_decode_args(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="letter accuracy of a hypothesis dump")
    p.add_argument("hyps", type=Path)
    p.add_argument("--lm", type=Path)
    p.add_argument("--out", type=Path, help="write metrics.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect-eval", help="IoU and miss rate of tubes against ground truth")
    p.add_argument("--tubes", type=Path, required=True, help="directory of <id>.txt tube dumps")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, help="write metrics.json")
    p.set_defaults(func=cmd_detect_eval)

    p = sub.add_parser("lm-train", help="fit a character n-gram model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path, help="dataset whose labels form the corpus")
    src.add_argument("--text", type=Path, help="whitespace-separated words")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--alphabet")
    p.add_argument("--dev", type=Path, help="dataset for a perplexity report")
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("gradcheck", help="finite-difference check of the model gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=3)
    p.add_argument("--corrupt", metavar="TENSOR:INDEX", help="perturb one analytic entry")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench-zoom-vs-enlarge", help="peak memory of zooming vs enlarging")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--zoom-ratios", type=_float_list, default=DEFAULT_RATIOS)
    p.add_argument("--frame-side", type=int, default=112)
    p.add_argument("--input-side", type=int, default=56)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("viz", help="attention and tube overlays for a run")
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--id", action="append", help="sequence id (repeatable)")
    p.add_argument("--count", type=int, default=2, help="sequences to draw when no --id")
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.set_defaults(func=cmd_viz)
    return parser


EXPECTED_ERRORS = (CliError, DatasetError, UnalignableError, InvalidTubeError, ModelNumericsError,
                   ValueError, OSError, KeyError, json.JSONDecodeError)


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except EXPECTED_ERRORS as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"fingerzoom {args.command}: error: {msg}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
