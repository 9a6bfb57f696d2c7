"""Mean-absolute-error reporting, ablations and training-fraction sweeps."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dataset import build_training_set, raw_samples, split_events, subsample
from .dataset.splits import DEFAULT_RATIOS
from .features import ABLATION_LABELS, FULL_DIM, FULL_MASK, FeatureMask, feature_dim
from .model import ModelConfig, TrainConfig, VariantMismatchError, forward, train

MOST_PROBABLE = "most_probable"
BEST_OF_K = "best_of_k"
MODES = (MOST_PROBABLE, BEST_OF_K)

MAE_FIELDS = ("eyes_mae_s", "foot_mae_s", "hands_mae_s", "overall_mae_s", "takeover_mae_s")


def canonical_mode(mode: str) -> str:
    key = mode.strip().lower().replace("-", "_")
    if key not in MODES:
        raise ValueError(f"unknown evaluation mode {mode!r}; choose from {', '.join(MODES)}")
    return key


@dataclass
class MaeReport:
    eyes_mae_s: float
    foot_mae_s: float
    hands_mae_s: float
    overall_mae_s: float
    takeover_mae_s: float
    n_samples: int
    model_id: str = ""
    dataset_id: str = ""
    mode: str = MOST_PROBABLE

    def maes(self) -> dict:
        return {k.removesuffix("_mae_s"): getattr(self, k) for k in MAE_FIELDS}

    def row(self) -> dict:
        return asdict(self)


REPORT_FIELDS = tuple(f.name for f in fields(MaeReport))


def mae_report(pred, targets, **ids) -> MaeReport:
    """Component, overall and take-over MAEs of ``(N, 3)`` predictions.

    Take-over time is the max of the three times, taken separately on the
    prediction and the target side.
    """
    pred = np.asarray(pred, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if pred.shape != targets.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise ValueError(f"predictions {pred.shape} and targets {targets.shape} must both be (N, 3)")
    if len(pred) == 0:
        raise ValueError("cannot evaluate on an empty sample set")
    comp = np.abs(pred - targets).mean(axis=0)
    tot = np.abs(pred.max(axis=1) - targets.max(axis=1)).mean()
    return MaeReport(
        eyes_mae_s=float(comp[0]),
        foot_mae_s=float(comp[1]),
        hands_mae_s=float(comp[2]),
        overall_mae_s=float(comp.mean()),
        takeover_mae_s=float(tot),
        n_samples=len(pred),
        **ids,
    )


def predict_triples(model, samples, mode: str = MOST_PROBABLE, batch_size: int = 256):
    """Selected ``(N, 3)`` time triples and the ``(N, 3)`` targets."""
    mode = canonical_mode(mode)
    if mode == BEST_OF_K and not model.config.multimodal:
        raise VariantMismatchError(f"best-of-K evaluation needs a multimodal model, got {model.config.variant}")
    samples = list(samples)
    if not samples:
        raise ValueError("cannot evaluate on an empty sample set")
    cols = model.mask.columns()
    targets = np.array([s.targets for s in samples], dtype=float)
    out = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        X = np.stack([s.window[:, cols] for s in chunk])
        pred = forward(model, X)
        if mode == BEST_OF_K:
            out.append(pred.best_of_k(targets[start : start + len(chunk)]))
        else:
            out.append(pred.most_probable())
    return np.concatenate(out), targets


def evaluate(model, samples, mode: str = MOST_PROBABLE, model_id: str = "", dataset_id: str = "") -> MaeReport:
    """MAE report of ``model`` on ``samples`` (most-probable or best-of-K mode)."""
    mode = canonical_mode(mode)
    pred, targets = predict_triples(model, samples, mode)
    return mae_report(pred, targets, model_id=model_id or model.config.variant, dataset_id=dataset_id, mode=mode)


def mean_report(reports, **ids) -> MaeReport:
    if not reports:
        raise ValueError("no reports to average")
    vals = {k: float(np.mean([getattr(r, k) for r in reports])) for k in MAE_FIELDS}
    return MaeReport(**vals, n_samples=reports[0].n_samples, mode=reports[0].mode, **ids)


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentResult:
    """Seed-averaged ``rows``, the per-seed reports behind them and training curves."""

    rows: list = field(default_factory=list)
    per_seed: list = field(default_factory=list)
    curves: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def by_label(self) -> dict:
        return {r["label"]: r for r in self.rows}


def _check_events(events) -> list:
    events = list(events)
    if not events:
        raise ValueError("no events given")
    for ev in events:
        if ev.frames.ndim != 2 or ev.frames.shape[1] != FULL_DIM:
            raise ValueError(
                f"event {ev.event_id} has {ev.frames.shape[-1]} feature columns; masks index the {FULL_DIM}-column layout"
            )
    return events


def _run(train_events, eval_samples, model_config, train_config, mask, seed, augment, track_curves=True):
    """Train one seeded model and evaluate it; returns ``(report, history)``."""
    cfg = replace(model_config, input_dim=feature_dim(mask), seed=seed)
    tc = replace(train_config, seed=seed)
    samples = build_training_set(train_events, augment=augment)
    model, hist = train(samples, eval_samples if track_curves else None, cfg, tc, mask)
    return evaluate(model, eval_samples), hist


def _curve_rows(label, seed, hist):
    return [{"label": label, "seed": seed, **row} for row in hist.rows]


@dataclass
class AblationSpec:
    masks: tuple = field(default_factory=lambda: tuple(FeatureMask.from_label(s) for s in ABLATION_LABELS))
    model_config: ModelConfig = field(default_factory=ModelConfig)
    train_config: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple = (0,)
    augment: bool = True
    split_ratios: tuple = DEFAULT_RATIOS
    split_seed: int = 0

    def __post_init__(self):
        self.masks = tuple(FeatureMask.from_label(m) if isinstance(m, str) else m for m in self.masks)
        if not self.masks:
            raise ValueError("an ablation needs at least one feature mask")
        if not self.seeds:
            raise ValueError("an ablation needs at least one seed")

    def to_dict(self) -> dict:
        return {
            "masks": [m.label for m in self.masks],
            "model_config": self.model_config.to_dict(),
            "train_config": self.train_config.to_dict(),
            "seeds": list(self.seeds),
            "augment": self.augment,
            "split_ratios": list(self.split_ratios),
            "split_seed": self.split_seed,
        }


def ablate(spec: AblationSpec, events) -> ExperimentResult:
    """One model per mask and seed on a shared split; rows are validation MAEs averaged over seeds."""
    events = _check_events(events)
    train_ev, val_ev, _ = split_events(events, spec.split_ratios, spec.split_seed)
    val = raw_samples(val_ev)
    res = ExperimentResult()
    for mask in spec.masks:
        reports = []
        for seed in spec.seeds:
            rep, hist = _run(train_ev, val, spec.model_config, spec.train_config, mask, seed, spec.augment)
            rep.model_id, rep.dataset_id = f"{spec.model_config.variant}:{mask.label}", "val"
            reports.append(rep)
            res.per_seed.append({"label": mask.label, "seed": seed, **rep.row()})
            res.curves.extend(_curve_rows(mask.label, seed, hist))
        avg = mean_report(reports, model_id=f"{spec.model_config.variant}:{mask.label}", dataset_id="val")
        res.rows.append({"label": mask.label, **avg.row()})
    return res


def fraction_sweep(fractions, events, model_config: ModelConfig = ModelConfig(),
                   train_config: TrainConfig = TrainConfig(), seeds=(0,), augment: bool = True,
                   split_ratios=DEFAULT_RATIOS, split_seed: int = 0) -> ExperimentResult:
    """Train on a seeded subset of the train split for each fraction; score on the fixed test split."""
    fractions = [float(f) for f in fractions]
    bad = [f for f in fractions if not 0 < f <= 1]
    if bad or not fractions:
        raise ValueError(f"fractions must be a non-empty subset of (0, 1], got {fractions}")
    events = _check_events(events)
    train_ev, _, test_ev = split_events(events, split_ratios, split_seed)
    test = raw_samples(test_ev)
    res = ExperimentResult()
    mask = FULL_MASK
    for frac in fractions:
        reports = []
        label = f"{frac:g}"
        for seed in seeds:
            part = subsample(train_ev, frac, seed)
            rep, hist = _run(part, test, model_config, train_config, mask, seed, augment)
            rep.model_id, rep.dataset_id = f"{model_config.variant}:{label}", "test"
            reports.append(rep)
            res.per_seed.append({"label": label, "seed": seed, "n_train_events": len(part), **rep.row()})
            res.curves.extend(_curve_rows(label, seed, hist))
        avg = mean_report(reports, model_id=f"{model_config.variant}:{label}", dataset_id="test")
        res.rows.append({"label": label, "n_train_events": len(subsample(train_ev, frac, seeds[0])), **avg.row()})
    return res


def compare_augmentation(events, model_config: ModelConfig = ModelConfig(),
                         train_config: TrainConfig = TrainConfig(), seed: int = 0,
                         mask: FeatureMask | None = None, split_ratios=DEFAULT_RATIOS,
                         split_seed: int = 0):
    """Raw-trained and augmented-trained reports on the same untouched validation split.

    Both runs share the split, the seed and therefore the initial weights.
    """
    events = _check_events(events)
    mask = mask or FULL_MASK
    train_ev, val_ev, _ = split_events(events, split_ratios, split_seed)
    val = raw_samples(val_ev)
    out = []
    for augment in (False, True):
        rep, _ = _run(train_ev, val, model_config, train_config, mask, seed, augment, track_curves=False)
        rep.model_id = f"{model_config.variant}:{'augmented' if augment else 'raw'}"
        rep.dataset_id = "val"
        out.append(rep)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# report files


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def format_csv(rows, config: dict | None = None) -> str:
    """CSV text; the resolved configuration goes in a leading ``# config:`` comment."""
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    rows = list(rows)
    if rows:
        header = list(rows[0])
        for r in rows[1:]:
            header += [k for k in r if k not in header]
        w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_report(path, rows, config: dict | None = None) -> None:
    _atomic_write(path, format_csv(rows, config))


def read_report(path):
    """Rows and embedded config of a file written by :func:`write_report`."""
    lines = Path(path).read_text().splitlines()
    config = None
    if lines and lines[0].startswith("# config: "):
        config = json.loads(lines[0][len("# config: ") :])
        lines = lines[1:]
    return list(csv.DictReader(lines)), config


def format_table(rows, columns=("label",) + MAE_FIELDS) -> str:
    """Fixed-width text table for terminal output."""
    rows = list(rows)
    cols = [c for c in columns if any(c in r for r in rows)]
    cells = [[c for c in cols]] + [
        [f"{r[c]:.4f}" if isinstance(r.get(c), float) else str(r.get(c, "")) for c in cols] for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells)
