"""Training losses and their gradients with respect to the network outputs.

The ``*_with_grad`` functions work on raw head outputs (times and mode
logits) and return ``(loss, d_outputs...)`` for backpropagation; the public
``loss_l1`` / ``loss_min_of_k`` take a :class:`Prediction`.
"""

from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-9
LOG_PROB_FLOOR = float(np.log(PROB_FLOOR))


class VariantMismatchError(ValueError):
    pass


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def l1_with_grad(o, t):
    """Batch mean of the summed absolute error; subgradient at 0 is 0."""
    N = o.shape[0]
    diff = o - t
    return np.abs(diff).sum() / N, np.sign(diff) / N


def mode_errors(modes, t):
    """Summed absolute error of every mode, shape ``(N, K)``."""
    return np.abs(modes - t[:, None, :]).sum(axis=-1)


def min_of_k_terms(modes, logits, t):
    """Per-sample regression term, classification term and selected mode.

    Ties go to the lowest mode index (``argmin`` semantics).
    """
    err = mode_errors(modes, t)
    best = np.argmin(err, axis=1)
    rows = np.arange(len(best))
    logq = log_softmax(logits)
    reg = err[rows, best]
    cls = -np.maximum(logq[rows, best], LOG_PROB_FLOOR)
    return reg, cls, best


def min_of_k_with_grad(modes, logits, t):
    N, K, _ = modes.shape
    if K < 2:
        raise ValueError("min-of-K loss needs at least two modes")
    reg, cls, best = min_of_k_terms(modes, logits, t)
    rows = np.arange(N)
    d_modes = np.zeros_like(modes)
    d_modes[rows, best] = np.sign(modes[rows, best] - t) / N
    logq = log_softmax(logits)
    q = np.exp(logq)
    onehot = np.zeros_like(q)
    onehot[rows, best] = 1.0
    d_logits = (q - onehot) / N
    # past the floor the clamped log is constant in the logits
    d_logits[logq[rows, best] < LOG_PROB_FLOOR] = 0.0
    return (reg.sum() + cls.sum()) / N, d_modes, d_logits


def mse_with_grad(y, t):
    N = y.shape[0]
    diff = y - t
    return float((diff * diff).sum() / N), 2.0 * diff / N


def loss_l1(pred, targets) -> float:
    if pred.multimodal:
        raise VariantMismatchError("L1 loss expects a point prediction; use loss_min_of_k for multimodal output")
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    return float(l1_with_grad(pred.times, t)[0])


def loss_min_of_k(pred, targets) -> float:
    if not pred.multimodal:
        raise VariantMismatchError("min-of-K loss expects a multimodal prediction")
    if pred.modes.shape[1] < 2:
        raise ValueError("min-of-K loss needs at least two modes")
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    reg, cls, _ = min_of_k_terms(pred.modes, pred.logits, t)
    return float((reg + cls).mean())
