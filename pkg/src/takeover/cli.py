"""Command-line entry point: ``takeover <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 data or format error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import decision as dec
from .config import ExperimentConfig
from .dataset import (
    ACTIVITIES,
    EventFormatError,
    build_training_set,
    expected_size,
    load_events,
    raw_samples,
    save_events,
    scaled_counts,
    split_events,
    synthesize_events,
    synthesize_ori_labels,
    time_statistics,
    window_at,
)
from .eval import (
    AblationSpec,
    ablate,
    evaluate,
    format_table,
    fraction_sweep,
    write_report,
)
from .features import FULL_DIM, FeatureMask, feature_dim
from .model import (
    CheckpointError,
    NumericError,
    VariantMismatchError,
    load_checkpoint,
    pretrain_ori,
    save_checkpoint,
    train,
    transfer,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("takeover")


class UsageError(Exception):
    pass


def _atomic_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _config(args) -> ExperimentConfig:
    """Config file (or defaults) with command-line overrides applied."""
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "variant", None):
        cfg.model = replace(cfg.model, variant=args.variant)
    if getattr(args, "hidden", None):
        cfg.model = replace(cfg.model, hidden_dim=args.hidden)
    if getattr(args, "epochs", None) is not None:
        cfg.train = replace(cfg.train, epochs=args.epochs)
    if getattr(args, "lr", None) is not None:
        cfg.train = replace(cfg.train, lr=args.lr)
    if getattr(args, "mask", None):
        cfg.mask = FeatureMask.from_label(args.mask).label
    return cfg


def _model_config(cfg: ExperimentConfig, mask: FeatureMask):
    return replace(cfg.model, input_dim=feature_dim(mask), seed=cfg.seed)


def _train_config(cfg: ExperimentConfig):
    return replace(cfg.train, seed=cfg.seed)


def _events(cfg, args):
    path = getattr(args, "events", None) or cfg.paths.events
    if not Path(path).exists():
        raise EventFormatError(f"event file not found: {path}")
    return load_events(path)


def _echo(cfg: ExperimentConfig, **extra) -> dict:
    return {"experiment": cfg.to_dict(), **extra}


# ---------------------------------------------------------------------------
# commands


def cmd_config(args) -> int:
    cfg = _config(args)
    text = cfg.dumps() + "\n"
    if args.out:
        _atomic_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    synth = cfg.synth
    if args.n_events is not None:
        synth = replace(synth, counts=scaled_counts(args.n_events))
    synth = replace(synth, seed=cfg.seed)
    synth.validate()
    out = args.out or cfg.paths.events
    events = synthesize_events(synth)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_events(events, out)
    stats = time_statistics(events)
    print(f"wrote {len(events)} events to {out}")
    print(f"{'activity':<16}{'count':>6}  {'eyes':>12}  {'foot':>12}  {'hands':>12}  {'takeover':>12}")
    for act in ACTIVITIES:
        if act not in stats:
            continue
        row = stats[act]
        cells = "  ".join(f"{m:5.2f}+-{s:4.2f}" for m, s in (row[k] for k in ("eyes", "foot", "hands", "takeover")))
        print(f"{act:<16}{row['count']:>6}  {cells}")
    print(f"total {len(events)}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    mask = cfg.feature_mask
    mc = _model_config(cfg, mask)
    tc = _train_config(cfg)
    ori = None
    if args.from_ori:
        ori = load_checkpoint(args.from_ori)
        if ori.task != "ori":
            raise UsageError(f"{args.from_ori} is not a readiness (ori) checkpoint")
        mask = ori.mask
        mc = replace(mc, input_dim=ori.config.input_dim)
    events = _events(cfg, args)
    train_ev, val_ev, _ = split_events(events, cfg.split.ratios, cfg.split.seed)
    samples = build_training_set(train_ev, augment=args.augment)
    n_raw = len(train_ev)
    print(f"train events {n_raw}  raw samples {n_raw}", end="")
    if args.augment:
        print(f"  augmented samples {len(samples)} (expected {expected_size(train_ev)})")
    else:
        print()
    model = transfer(ori, mc, seed=cfg.seed) if ori is not None else None
    model, hist = train(samples, raw_samples(val_ev) if val_ev else None, mc, tc, mask, model=model)
    out = Path(args.out or Path(cfg.paths.checkpoints) / "model.ckpt")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    hist_path = Path(args.history) if args.history else out.with_suffix(".history.csv")
    write_report(hist_path, hist.rows, _echo(cfg, command="train", augment=args.augment, from_ori=args.from_ori))
    for row in hist.rows:
        print("  ".join(f"{k} {v:.4f}" if isinstance(v, float) else f"{k} {v}" for k, v in row.items()))
    print(f"saved {out} and {hist_path}")
    return EXIT_OK


def cmd_pretrain_ori(args) -> int:
    cfg = _config(args)
    mask = cfg.feature_mask
    mc = _model_config(cfg, mask)
    tc = _train_config(cfg)
    events = _events(cfg, args)
    train_ev, _, _ = split_events(events, cfg.split.ratios, cfg.split.seed)
    wins, labels = synthesize_ori_labels(train_ev, seed=cfg.seed)
    windows = [window_at(ev, end) for ev, end in wins]
    print(f"readiness windows {len(windows)}")
    model, hist = pretrain_ori(windows, labels, mc, tc, mask)
    out = Path(args.out or Path(cfg.paths.checkpoints) / "ori.ckpt")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    for row in hist.rows:
        print(f"epoch {row['epoch']}  loss {row['train_loss']:.5f}")
    print(f"saved {out}")
    return EXIT_OK


def _eval_samples(cfg, args):
    events = _events(cfg, args)
    if args.split == "all":
        return raw_samples(events)
    parts = dict(zip(("train", "val", "test"), split_events(events, cfg.split.ratios, cfg.split.seed)))
    sel = parts[args.split]
    if not sel:
        raise UsageError(f"split '{args.split}' is empty")
    return build_training_set(sel, augment=args.augmented) if args.augmented else raw_samples(sel)


def cmd_eval(args) -> int:
    cfg = _config(args)
    model = load_checkpoint(args.checkpoint)
    samples = _eval_samples(cfg, args)
    mode = "best_of_k" if args.best_of_k else "most_probable"
    rep = evaluate(model, samples, mode, model_id=Path(args.checkpoint).name, dataset_id=args.split)
    print(format_table([rep.row()], columns=("model_id", "dataset_id", "mode", "eyes_mae_s", "foot_mae_s",
                                              "hands_mae_s", "overall_mae_s", "takeover_mae_s", "n_samples")))
    if args.out:
        write_report(args.out, [rep.row()], _echo(cfg, command="eval", checkpoint=str(args.checkpoint), split=args.split))
    return EXIT_OK


def _seeds(cfg, args):
    return tuple(args.seeds) if args.seeds else cfg.seeds


def cmd_ablate(args) -> int:
    cfg = _config(args)
    masks = args.masks or cfg.ablation_masks
    spec = AblationSpec(
        masks=tuple(FeatureMask.from_label(m) for m in masks),
        model_config=_model_config(cfg, FeatureMask.from_label("FGHSO")),
        train_config=_train_config(cfg),
        seeds=_seeds(cfg, args),
        augment=not args.no_augment,
        split_ratios=cfg.split.ratios,
        split_seed=cfg.split.seed,
    )
    events = _events(cfg, args)
    res = ablate(spec, events)
    _write_experiment("ablation", res, cfg, spec.to_dict(), args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    fractions = args.fractions or cfg.sweep_fractions
    bad = [f for f in fractions if not 0 < f <= 1]
    if bad:
        raise UsageError(f"fractions must lie in (0, 1], got {bad}")
    mc = _model_config(cfg, FeatureMask.from_label("FGHSO"))
    tc = _train_config(cfg)
    events = _events(cfg, args)
    res = fraction_sweep(fractions, events, mc, tc, _seeds(cfg, args), not args.no_augment,
                         cfg.split.ratios, cfg.split.seed)
    _write_experiment("sweep", res, cfg, {"fractions": list(fractions)}, args)
    return EXIT_OK


def _write_experiment(name, res, cfg, extra, args):
    out_dir = Path(args.out_dir) if args.out_dir else cfg.report_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = _echo(cfg, command=name, spec=extra)
    write_report(out_dir / f"{name}.csv", res.rows, echo)
    write_report(out_dir / f"{name}_per_seed.csv", res.per_seed, echo)
    write_report(out_dir / f"{name}_curves.csv", res.curves, echo)
    print(format_table(res.rows))
    print(f"reports written to {out_dir}")


def parse_frame_line(line: str, lineno: int = 0) -> np.ndarray:
    """One frame record: a JSON array of 41 features, optionally followed by the timestamp."""
    try:
        row = np.asarray(json.loads(line), dtype=float)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise EventFormatError(f"line {lineno}: frame record is not a JSON number array ({exc})") from None
    if row.ndim != 1 or row.shape[0] not in (FULL_DIM, FULL_DIM + 1):
        raise EventFormatError(f"line {lineno}: frame record needs {FULL_DIM} features (+ optional timestamp)")
    if not np.all(np.isfinite(row)):
        raise EventFormatError(f"line {lineno}: non-finite value in frame record")
    return row[:FULL_DIM]


def read_frames(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                rows.append(parse_frame_line(line, lineno))
    if not rows:
        raise EventFormatError(f"{path}: no frame records")
    return np.stack(rows)


def _emit(rec: dict) -> None:
    sys.stdout.write(json.dumps(rec, separators=(",", ":")) + "\n")


def _predictions(model, args):
    """Yield window predictions from ``--window FILE`` or frame records on stdin."""
    stride = args.stride
    if args.window:
        frames = read_frames(args.window)
        if len(frames) < model.config.window_frames:
            raise EventFormatError(f"{args.window}: {len(frames)} frames, a window needs {model.config.window_frames}")
        yield from dec.stream_predict(frames, model, stride)
        return
    sp = dec.StreamPredictor(model, stride)
    for lineno, line in enumerate(sys.stdin, start=1):
        if not line.strip():
            continue
        out = sp.push(parse_frame_line(line, lineno))
        if out is not None:
            yield out


def cmd_predict(args) -> int:
    cfg = _config(args)
    model = load_checkpoint(args.checkpoint)
    if args.stride is None:
        args.stride = cfg.decision.stride
    if args.stride < 1:
        raise UsageError("--stride must be >= 1")
    for wp in _predictions(model, args):
        _emit(wp.to_record())
    return EXIT_OK


def cmd_decide(args) -> int:
    cfg = _config(args)
    eps = cfg.decision.epsilon_s if args.epsilon is None else args.epsilon
    policy = dec.canonical_policy(args.policy or cfg.decision.policy)
    if args.ttc <= 0 or eps < 0:
        raise UsageError("--ttc must be > 0 and --epsilon >= 0")
    if args.tot is not None:
        _emit(dec.decide(args.tot, args.ttc, eps).to_record())
        return EXIT_OK
    if not args.checkpoint:
        raise UsageError("decide needs --tot or --checkpoint with --window/--stream")
    model = load_checkpoint(args.checkpoint)
    if args.stride is None:
        args.stride = cfg.decision.stride
    for wp in _predictions(model, args):
        d = dec.decide_prediction(wp.prediction, args.ttc, eps, policy)
        _emit({"end_frame": wp.end_frame, **d.to_record()})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="takeover", description="Driver take-over time estimation experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="experiment config JSON (see 'config --dump')")
        if seed:
            sp.add_argument("--seed", type=int, help="global seed (overrides config)")

    def model_opts(sp):
        sp.add_argument("--variant", help="baseline, independent, baseline_mm or independent_mm")
        sp.add_argument("--hidden", type=int, help="LSTM hidden size")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--lr", type=float)

    sp = sub.add_parser("config", help="print or write the resolved configuration")
    common(sp)
    sp.add_argument("--dump", action="store_true", help="print the full configuration (default)")
    sp.add_argument("--out", help="write to a file instead of stdout")
    sp.set_defaults(func=cmd_config)

    sp = sub.add_parser("gen-data", help="generate a synthetic event file")
    common(sp)
    sp.add_argument("--out", help="event file (.jsonl or .jsonl.gz)")
    sp.add_argument("--n-events", type=int, help="total events, keeping the default activity proportions")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="train a take-over time model")
    common(sp)
    model_opts(sp)
    sp.add_argument("--events")
    sp.add_argument("--mask", help="feature groups, e.g. FGHSO")
    sp.add_argument("--augment", action="store_true", help="add one sample per frame offset after the request")
    sp.add_argument("--from-ori", metavar="CHECKPOINT", help="initialise the trunk from a readiness checkpoint")
    sp.add_argument("--out", help="checkpoint path")
    sp.add_argument("--history", help="history CSV path (default: next to the checkpoint)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("pretrain-ori", help="pre-train a readiness model on simulated ratings")
    common(sp)
    model_opts(sp)
    sp.add_argument("--events")
    sp.add_argument("--mask")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_pretrain_ori)

    sp = sub.add_parser("eval", help="MAE report of a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--events")
    sp.add_argument("--split", choices=("train", "val", "test", "all"), default="val")
    sp.add_argument("--augmented", action="store_true", help="evaluate on augmented samples of the split")
    sp.add_argument("--best-of-k", action="store_true", help="score the best mode per sample (multimodal only)")
    sp.add_argument("--out", help="report CSV path")
    sp.set_defaults(func=cmd_eval)

    for name, func, helptext in (("ablate", cmd_ablate, "feature-mask ablation"),
                                 ("sweep", cmd_sweep, "training-fraction sweep")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        model_opts(sp)
        sp.add_argument("--events")
        sp.add_argument("--seeds", type=int, nargs="+")
        sp.add_argument("--no-augment", action="store_true")
        sp.add_argument("--out-dir", help="report directory (default: config or $TAKEOVER_REPORT_DIR)")
        if name == "ablate":
            sp.add_argument("--masks", nargs="+", help="mask labels (default: the 11 standard rows)")
        else:
            sp.add_argument("--fractions", type=float, nargs="+")
        sp.set_defaults(func=func)

    for name, func in (("predict", cmd_predict), ("decide", cmd_decide)):
        sp = sub.add_parser(name, help="windowed predictions" if name == "predict" else "hand-over decisions")
        common(sp, seed=False)
        src = sp.add_mutually_exclusive_group(required=name == "predict")
        src.add_argument("--stream", action="store_true", help="read frame records from stdin")
        src.add_argument("--window", metavar="FILE", help="frame records file")
        sp.add_argument("--checkpoint", required=name == "predict")
        sp.add_argument("--stride", type=int, help="frames between window positions")
        if name == "decide":
            sp.add_argument("--ttc", type=float, required=True, help="time to collision (s)")
            sp.add_argument("--epsilon", type=float, help=f"margin (s), default {dec.DEFAULT_EPSILON_S}")
            sp.add_argument("--policy", choices=dec.POLICIES, help="multimodal policy")
            sp.add_argument("--tot", type=float, help="decide for a given take-over time instead of a model")
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "command", None) == "train" and args.from_ori == "":
        parser.error("--from-ori needs a checkpoint path")
    try:
        return args.func(args)
    except (UsageError, VariantMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EventFormatError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
