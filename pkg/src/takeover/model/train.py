"""Minibatch training, readiness pre-training and trunk transfer."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..features import FULL_MASK, FeatureMask, feature_dim
from .adam import Adam
from .config import ModelConfig, TrainConfig
from .network import ORI, TOT, Model, init_model, loss_and_grad

log = logging.getLogger(__name__)


@dataclass
class History:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def train_losses(self) -> list[float]:
        return [r["train_loss"] for r in self.rows]


def _check_dims(config: ModelConfig, mask: FeatureMask) -> None:
    if feature_dim(mask) != config.input_dim:
        raise ValueError(
            f"feature mask {mask.label} gives {feature_dim(mask)} inputs but model expects {config.input_dim}"
        )


def _fit(model: Model, windows, targets, tc: TrainConfig, on_epoch=None) -> History:
    """Shared epoch loop. ``windows`` is a sequence of full-width ``(T, 41)``
    arrays; the model's mask picks the columns per batch."""
    n = len(windows)
    if n == 0:
        raise ValueError("training set is empty")
    cols = model.mask.columns()
    T = model.config.window_frames
    for w in (windows[0], windows[-1]):
        if w.shape[0] != T:
            raise ValueError(f"sample windows have {w.shape[0]} rows, model expects {T}")
    dtype = np.dtype(tc.precision)
    targets = np.asarray(targets, dtype=dtype)
    opt = Adam.from_config(tc)
    rng = np.random.default_rng(tc.seed)
    history = History()
    model.params = {k: v.astype(dtype) for k, v in model.params.items()}
    try:
        for epoch in range(tc.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, tc.batch_size):
                idx = order[start : start + tc.batch_size]
                X = np.stack([windows[i][:, cols] for i in idx]).astype(dtype, copy=False)
                loss, grads = loss_and_grad(model, X, targets[idx])
                opt.step(model.params, grads)
                total += loss * len(idx)
            row = {"epoch": epoch + 1, "train_loss": total / n}
            if on_epoch is not None:
                row.update(on_epoch(model))
            history.rows.append(row)
            log.info("epoch %d  loss %.4f", epoch + 1, row["train_loss"])
    finally:
        model.params = {k: v.astype(np.float64) for k, v in model.params.items()}
    return history


def train(train_samples, val_samples, model_config: ModelConfig, train_config: TrainConfig = TrainConfig(),
          mask: FeatureMask = FULL_MASK, model: Model | None = None):
    """Train a take-over time model; returns ``(model, history)``.

    Pass ``model`` to fine-tune an existing network (e.g. after
    :func:`transfer`); otherwise one is initialized from ``model_config``.
    History rows carry the epoch's mean training loss and, when validation
    samples are given, the most-probable-mode validation MAEs.
    """
    _check_dims(model_config, mask)
    if model is None:
        model = init_model(model_config, TOT, mask)
    elif model.config.input_dim != model_config.input_dim:
        raise ValueError("model input_dim does not match configuration")
    model.mask = mask

    on_epoch = None
    if val_samples:
        from ..eval import evaluate

        def on_epoch(m):
            r = evaluate(m, val_samples)
            return {f"val_{k}": v for k, v in r.maes().items()}

    windows = [s.window for s in train_samples]
    targets = [s.targets for s in train_samples]
    history = _fit(model, windows, targets, train_config, on_epoch)
    return model, history


def pretrain_ori(windows, labels, model_config: ModelConfig, train_config: TrainConfig = TrainConfig(),
                 mask: FeatureMask = FULL_MASK):
    """Train trunk plus a sigmoid readiness head with squared error."""
    _check_dims(model_config, mask)
    labels = np.asarray(labels, dtype=float)
    if labels.size and (labels.min() < 0 or labels.max() > 1):
        raise ValueError("readiness labels must lie in [0, 1]")
    model = init_model(model_config, ORI, mask)
    history = _fit(model, list(windows), labels, train_config)
    return model, history


def transfer(ori_model: Model, config: ModelConfig, seed: int | None = None) -> Model:
    """New take-over model whose trunk is copied from ``ori_model``; heads are fresh."""
    src = ori_model.config
    if (src.input_dim, src.hidden_dim, src.n_cells, src.window_frames) != (
        config.input_dim,
        config.hidden_dim,
        config.n_cells,
        config.window_frames,
    ):
        raise ValueError(
            "incompatible trunk: readiness model has "
            f"input_dim={src.input_dim}, hidden_dim={src.hidden_dim}, cells={src.n_cells}; "
            f"target has input_dim={config.input_dim}, hidden_dim={config.hidden_dim}, cells={config.n_cells}"
        )
    model = init_model(config, TOT, ori_model.mask, seed=seed)
    for k in ori_model.trunk_names():
        model.params[k] = ori_model.params[k].copy()
    return model
