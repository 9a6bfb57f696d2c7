"""Hand-over criterion and sliding-window take-over time estimation.

Control is handed to the driver only when the predicted take-over time plus
a manoeuvring margin fits strictly inside the time to collision::

    HandOver  iff  tot + epsilon < ttc

Otherwise the vehicle should come to a safe stop.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .model import Prediction, VariantMismatchError, forward

HAND_OVER = "HandOver"
SAFE_STOP = "SafeStop"
DEFAULT_EPSILON_S = 0.5

MOST_PROBABLE = "most_probable"
EXPECTED = "expected"
WORST_MODE = "worst_mode"
POLICIES = (MOST_PROBABLE, EXPECTED, WORST_MODE)


@dataclass(frozen=True)
class Decision:
    verdict: str
    margin_s: float  # ttc - (tot + epsilon)
    tot_s: float
    ttc_s: float
    epsilon_s: float
    policy: str | None = None
    mode_verdicts: tuple = ()

    @property
    def hand_over(self) -> bool:
        return self.verdict == HAND_OVER

    def to_record(self) -> dict:
        rec = {
            "verdict": self.verdict,
            "margin_s": self.margin_s,
            "tot_s": self.tot_s,
            "ttc_s": self.ttc_s,
            "epsilon_s": self.epsilon_s,
        }
        if self.policy is not None:
            rec["policy"] = self.policy
            rec["mode_verdicts"] = list(self.mode_verdicts)
        return rec


def _check_inputs(tot_s, ttc_s, epsilon_s):
    vals = (float(tot_s), float(ttc_s), float(epsilon_s))
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"decision inputs must be finite, got tot={tot_s}, ttc={ttc_s}, epsilon={epsilon_s}")
    tot, ttc, eps = vals
    if ttc <= 0:
        raise ValueError(f"time to collision must be positive, got {ttc}")
    if eps < 0:
        raise ValueError(f"epsilon must be non-negative, got {eps}")
    if tot < 0:
        raise ValueError(f"take-over time must be non-negative, got {tot}")
    return tot, ttc, eps


def _verdict(tot, ttc, eps) -> str:
    return HAND_OVER if tot + eps < ttc else SAFE_STOP


def decide(tot_s, ttc_s, epsilon_s=DEFAULT_EPSILON_S) -> Decision:
    """Apply the hand-over criterion to a point take-over time.

    The boundary ``tot + epsilon == ttc`` is a safe stop.

    >>> decide(2.0, 3.0, 0.5).verdict
    'HandOver'
    >>> decide(2.5, 3.0, 0.5).verdict
    'SafeStop'
    """
    tot, ttc, eps = _check_inputs(tot_s, ttc_s, epsilon_s)
    return Decision(_verdict(tot, ttc, eps), ttc - (tot + eps), tot, ttc, eps)


def canonical_policy(policy: str) -> str:
    key = policy.strip().lower().replace("-", "_")
    if key not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")
    return key


def mode_takeover_times(modes) -> np.ndarray:
    """Take-over time of each mode: the max over its (eyes, foot, hands) triple."""
    return np.asarray(modes, dtype=float).max(axis=-1)


def policy_tot(modes, probs, policy: str) -> float:
    """Collapse ``K`` modes ``(K, 3)`` with probabilities ``(K,)`` to one take-over time."""
    policy = canonical_policy(policy)
    tots = mode_takeover_times(modes)
    probs = np.asarray(probs, dtype=float)
    if tots.ndim != 1 or probs.shape != tots.shape:
        raise ValueError(f"expected modes (K, 3) and probs (K,), got {np.shape(modes)} and {probs.shape}")
    if policy == MOST_PROBABLE:
        return float(tots[np.argmax(probs)])
    if policy == WORST_MODE:
        return float(tots.max())
    # rounding in the weighted sum must not push the expectation outside the modes
    return float(np.clip(np.dot(probs, tots), tots.min(), tots.max()))


def decide_mm(prediction, ttc_s, epsilon_s=DEFAULT_EPSILON_S, policy: str = MOST_PROBABLE) -> Decision:
    """Hand-over decision for one multimodal prediction.

    ``prediction`` is a :class:`~takeover.model.Prediction` holding a single
    sample (``modes`` of shape ``(K, 3)`` or ``(1, K, 3)``) or a
    ``(modes, probs)`` pair. ``policy`` picks the take-over time fed to the
    criterion: the most probable mode, the probability-weighted mean, or the
    slowest mode. Per-mode verdicts are reported alongside.
    """
    if isinstance(prediction, Prediction):
        if not prediction.multimodal:
            raise VariantMismatchError("decide_mm needs a multimodal prediction; use decide for point estimates")
        modes, probs = prediction.modes, prediction.probs
    else:
        modes, probs = prediction
    modes, probs = np.asarray(modes, dtype=float), np.asarray(probs, dtype=float)
    if modes.ndim == 3:
        if len(modes) != 1:
            raise ValueError("decide_mm takes a single prediction, not a batch")
        modes, probs = modes[0], probs[0]
    if not (np.all(np.isfinite(modes)) and np.all(np.isfinite(probs))):
        raise ValueError("multimodal prediction contains non-finite values")
    policy = canonical_policy(policy)
    tot = policy_tot(modes, probs, policy)
    base = decide(tot, ttc_s, epsilon_s)
    per_mode = tuple(_verdict(float(t), base.ttc_s, base.epsilon_s) for t in mode_takeover_times(modes))
    return Decision(base.verdict, base.margin_s, base.tot_s, base.ttc_s, base.epsilon_s, policy, per_mode)


def decide_prediction(prediction: Prediction, ttc_s, epsilon_s=DEFAULT_EPSILON_S, policy=MOST_PROBABLE) -> Decision:
    """Dispatch on the prediction type: point estimates ignore ``policy``."""
    if prediction.multimodal:
        return decide_mm(prediction, ttc_s, epsilon_s, policy)
    return decide(float(prediction.takeover()[0]), ttc_s, epsilon_s)


# ---------------------------------------------------------------------------
# streaming


def window_count(n_frames: int, stride: int, window: int = 60) -> int:
    """Number of window positions over ``n_frames`` frames."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if n_frames < window:
        return 0
    return (n_frames - window) // stride + 1


@dataclass
class WindowPrediction:
    end_frame: int  # window covers frames [end_frame - window, end_frame)
    prediction: Prediction  # single-sample prediction

    def to_record(self) -> dict:
        p = self.prediction
        rec = {"end_frame": self.end_frame}
        if p.multimodal:
            rec["modes"] = p.modes[0].tolist()
            rec["probs"] = p.probs[0].tolist()
        rec["times"] = [float(v) for v in p.most_probable()[0]]
        rec["tot_s"] = float(p.takeover()[0])
        return rec


def _stream_frames(stream, model) -> np.ndarray:
    X = np.asarray(stream, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"feature stream must be (frames, features), got shape {X.shape}")
    T = model.config.window_frames
    if len(X) < T:
        raise ValueError(f"stream has {len(X)} frames, shorter than one {T}-frame window")
    if X.shape[1] != model.config.input_dim:
        X = X[:, model.mask.columns()]
    return X


def stream_predict(stream, model, stride: int = 1, batch_size: int = 256) -> list[WindowPrediction]:
    """Predict at every window position of a recorded ``(frames, features)`` stream.

    Full 41-column frames are masked to the model's inputs. Window ``j`` ends
    (exclusive) at frame ``60 + j * stride`` and only sees frames before it.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    X = _stream_frames(stream, model)
    T = model.config.window_frames
    ends = list(range(T, len(X) + 1, stride))
    out = []
    for start in range(0, len(ends), batch_size):
        chunk = ends[start : start + batch_size]
        pred = forward(model, np.stack([X[e - T : e] for e in chunk]))
        out.extend(WindowPrediction(e, pred[i : i + 1]) for i, e in enumerate(chunk))
    return out


class StreamPredictor:
    """Incremental predictor for frames that arrive one at a time.

    ``push`` returns a :class:`WindowPrediction` when a window position is
    completed and ``None`` otherwise, so each output depends only on frames
    already seen.
    """

    def __init__(self, model, stride: int = 1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.model = model
        self.stride = stride
        self._cols = model.mask.columns()
        self._buf = deque(maxlen=model.config.window_frames)
        self.n_frames = 0

    def push(self, frame) -> WindowPrediction | None:
        frame = np.asarray(frame, dtype=float)
        if frame.ndim != 1:
            raise ValueError("push takes a single frame vector")
        if frame.shape[0] != self.model.config.input_dim:
            frame = frame[self._cols]
        if not np.all(np.isfinite(frame)):
            raise ValueError(f"frame {self.n_frames} contains non-finite values")
        self._buf.append(frame)
        self.n_frames += 1
        T = self.model.config.window_frames
        if self.n_frames < T or (self.n_frames - T) % self.stride:
            return None
        return WindowPrediction(self.n_frames, forward(self.model, np.stack(self._buf)[None]))
