"""The four recurrent take-over time architectures.

All variants share the same trunk: a rectified affine input transform
followed by one LSTM (baseline) or three LSTMs fed the same transformed
input (independent). Heads:

    baseline         final h -> softplus FC -> (eyes, foot, hands)
    independent      one FC shared by all three cells, applied per cell
    baseline_mm      final h -> K x 3 softplus times + K mode logits
    independent_mm   concat(h0, h1, h2) -> K x 3 times + K mode logits

A readiness ("ori") model swaps the head for a single sigmoid output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..features import FULL_MASK, FeatureMask
from . import losses
from .config import ModelConfig
from .lstm import NumericError, sequence_backward, sequence_forward, sigmoid

TOT = "tot"
ORI = "ori"


@dataclass
class Prediction:
    """Point ``times`` of shape ``(N, 3)``, or ``modes`` ``(N, K, 3)`` with ``probs`` ``(N, K)``."""

    times: np.ndarray | None = None
    modes: np.ndarray | None = None
    probs: np.ndarray | None = None
    logits: np.ndarray | None = None

    @property
    def multimodal(self) -> bool:
        return self.modes is not None

    def __len__(self):
        return len(self.modes if self.multimodal else self.times)

    def most_probable(self) -> np.ndarray:
        if not self.multimodal:
            return self.times
        k = np.argmax(self.probs, axis=1)
        return self.modes[np.arange(len(k)), k]

    def best_of_k(self, targets) -> np.ndarray:
        """Per sample, the mode with the least summed absolute error."""
        if not self.multimodal:
            return self.times
        err = losses.mode_errors(self.modes, np.atleast_2d(targets))
        k = np.argmin(err, axis=1)
        return self.modes[np.arange(len(k)), k]

    def takeover(self) -> np.ndarray:
        """Take-over time of the most probable triple (max of its components)."""
        return self.most_probable().max(axis=-1)

    def __getitem__(self, i) -> "Prediction":
        if self.multimodal:
            return Prediction(modes=self.modes[i], probs=self.probs[i], logits=self.logits[i])
        return Prediction(times=self.times[i])


@dataclass
class Model:
    config: ModelConfig
    params: dict = field(default_factory=dict)
    task: str = TOT
    mask: FeatureMask = FULL_MASK

    def trunk_names(self) -> list[str]:
        return [k for k in self.params if k.startswith(("in.", "lstm"))]

    def head_names(self) -> list[str]:
        return [k for k in self.params if not k.startswith(("in.", "lstm"))]

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()}, self.task, self.mask)


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def head_params(config: ModelConfig, task: str, rng) -> dict:
    H, K = config.hidden_dim, config.num_modes
    feat = H * config.n_cells
    p = {}
    if task == ORI:
        p["ori.W"] = _uniform(rng, (feat, 1), feat)
        p["ori.b"] = np.zeros(1)
    elif not config.multimodal:
        n_out = 1 if config.n_cells == 3 else 3
        p["out.W"] = _uniform(rng, (H, n_out), H)
        p["out.b"] = np.zeros(n_out)
    else:
        p["mode.W"] = _uniform(rng, (feat, 3 * K), feat)
        # spread initial modes apart so they do not collapse onto one solution
        p["mode.b"] = np.repeat(np.linspace(-0.5, 0.5, K), 3)
        p["prob.W"] = _uniform(rng, (feat, K), feat)
        p["prob.b"] = np.zeros(K)
    return p


def init_model(config: ModelConfig, task: str = TOT, mask: FeatureMask = FULL_MASK, seed: int | None = None) -> Model:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases except forget gates (+1)."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    D, H = config.input_dim, config.hidden_dim
    params = {"in.W": _uniform(rng, (D, H), D), "in.b": np.zeros(H)}
    for c in range(config.n_cells):
        b = np.zeros(4 * H)
        b[H : 2 * H] = 1.0
        params[f"lstm{c}.Wx"] = _uniform(rng, (H, 4 * H), H)
        params[f"lstm{c}.Wh"] = _uniform(rng, (H, 4 * H), H)
        params[f"lstm{c}.b"] = b
    params.update(head_params(config, task, rng))
    return Model(config, params, task, mask)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _check_windows(model: Model, X) -> np.ndarray:
    X = np.asarray(X, dtype=model.params["in.W"].dtype)
    if X.ndim == 2:
        X = X[None]
    cfg = model.config
    if X.ndim != 3 or X.shape[1] != cfg.window_frames or X.shape[2] != cfg.input_dim:
        raise ValueError(
            f"expected windows of shape (N, {cfg.window_frames}, {cfg.input_dim}), got {np.shape(X)}"
        )
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite values in input window")
    return X


def _forward(model: Model, X):
    p, cfg = model.params, model.config
    N, T, D = X.shape
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2)).reshape(T * N, D)
    Z = (Xt @ p["in.W"] + p["in.b"]).reshape(T, N, cfg.hidden_dim)
    U = np.maximum(Z, 0.0)
    cells = range(cfg.n_cells)
    h_last, cache = sequence_forward(
        U,
        np.stack([p[f"lstm{c}.Wx"] for c in cells]),
        np.stack([p[f"lstm{c}.Wh"] for c in cells]),
        np.stack([p[f"lstm{c}.b"] for c in cells]),
    )
    hs = list(h_last)
    out = {"Xt": Xt, "Z": Z, "hs": hs, "cache": cache}
    if model.task == ORI:
        feat = np.concatenate(hs, axis=1)
        a = feat @ p["ori.W"] + p["ori.b"]
        out.update(feat=feat, a=a, y=sigmoid(a)[:, 0])
    elif not cfg.multimodal:
        if cfg.n_cells == 1:
            a = hs[0] @ p["out.W"] + p["out.b"]
        else:
            a = np.concatenate([h @ p["out.W"] + p["out.b"] for h in hs], axis=1)
        out.update(a=a, times=_softplus(a))
    else:
        K = cfg.num_modes
        feat = np.concatenate(hs, axis=1)
        a = (feat @ p["mode.W"] + p["mode.b"]).reshape(N, K, 3)
        logits = feat @ p["prob.W"] + p["prob.b"]
        out.update(feat=feat, a=a, modes=_softplus(a), logits=logits)
    return out


def forward(model: Model, windows) -> Prediction:
    """Predict from ``(T, D)`` or ``(N, T, D)`` windows (already masked to ``input_dim``)."""
    X = _check_windows(model, windows)
    out = _forward(model, X)
    if model.task == ORI:
        return Prediction(times=out["y"][:, None])
    if model.config.multimodal:
        logits = out["logits"]
        return Prediction(modes=out["modes"], probs=np.exp(losses.log_softmax(logits)), logits=logits)
    return Prediction(times=out["times"])


def predict_ori(model: Model, windows) -> np.ndarray:
    if model.task != ORI:
        raise ValueError("model does not have a readiness head")
    X = _check_windows(model, windows)
    return _forward(model, X)["y"]


def loss_and_grad(model: Model, X, Y):
    """Loss and exact gradients for every parameter.

    The loss follows the head: L1 for point variants, min-of-K plus
    cross-entropy for multimodal ones, squared error for readiness models.
    """
    X = _check_windows(model, X)
    Y = np.asarray(Y, dtype=X.dtype)
    if len(Y) != len(X) or len(X) == 0:
        raise ValueError("batch must be non-empty with one target per window")
    p, cfg = model.params, model.config
    out = _forward(model, X)
    hs = out["hs"]
    g = {}

    if model.task == ORI:
        y = out["y"]
        loss, dy = losses.mse_with_grad(y, Y.reshape(-1))
        da = (dy * y * (1.0 - y))[:, None]
        g["ori.W"] = out["feat"].T @ da
        g["ori.b"] = da.sum(axis=0)
        dfeat = da @ p["ori.W"].T
        dhs = np.split(dfeat, cfg.n_cells, axis=1)
    elif not cfg.multimodal:
        loss, dtimes = losses.l1_with_grad(out["times"], Y)
        da = dtimes * sigmoid(out["a"])
        if cfg.n_cells == 1:
            g["out.W"] = hs[0].T @ da
            g["out.b"] = da.sum(axis=0)
            dhs = [da @ p["out.W"].T]
        else:
            g["out.W"] = sum(hs[c].T @ da[:, c : c + 1] for c in range(3))
            g["out.b"] = da.sum(axis=0).sum(keepdims=True)
            dhs = [da[:, c : c + 1] @ p["out.W"].T for c in range(3)]
    else:
        N, K = X.shape[0], cfg.num_modes
        loss, dmodes, dlogits = losses.min_of_k_with_grad(out["modes"], out["logits"], Y)
        da = (dmodes * sigmoid(out["a"])).reshape(N, 3 * K)
        feat = out["feat"]
        g["mode.W"] = feat.T @ da
        g["mode.b"] = da.sum(axis=0)
        g["prob.W"] = feat.T @ dlogits
        g["prob.b"] = dlogits.sum(axis=0)
        dfeat = da @ p["mode.W"].T + dlogits @ p["prob.W"].T
        dhs = np.split(dfeat, cfg.n_cells, axis=1)

    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")

    dU, dWx, dWh, db = sequence_backward(np.stack(dhs), out["cache"])
    for c in range(cfg.n_cells):
        g[f"lstm{c}.Wx"], g[f"lstm{c}.Wh"], g[f"lstm{c}.b"] = dWx[c], dWh[c], db[c]
    dZ = (dU * (out["Z"] > 0)).reshape(-1, cfg.hidden_dim)
    g["in.W"] = out["Xt"].T @ dZ
    g["in.b"] = dZ.sum(axis=0)
    return float(loss), g


def loss_value(model: Model, X, Y) -> float:
    """Loss only (no gradient); used by finite-difference checks."""
    X = _check_windows(model, X)
    Y = np.asarray(Y, dtype=X.dtype)
    out = _forward(model, X)
    if model.task == ORI:
        return losses.mse_with_grad(out["y"], Y.reshape(-1))[0]
    if not model.config.multimodal:
        return float(losses.l1_with_grad(out["times"], Y)[0])
    return float(losses.min_of_k_with_grad(out["modes"], out["logits"], Y)[0])
