"""Synthetic take-over events.

Each event has a latent per-component "remaining time" ``r_c(t)``: constant
at the annotated time ``t_c`` before the request, then counting down to zero
at ``t_c`` afterwards. A distraction level ``lam_c = 1 - exp(-r_c / kappa)``
blends a ready signature (eyes forward, hands on wheel, foot on pedal) with
an activity-specific distracted signature for the feature groups driven by
that component:

    eyes  -> gaze
    foot  -> foot
    hands -> hand activity, wrist distance, held objects

Features see the remaining time through a per-event multiplicative
perception error, so windows are informative but not perfectly so.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from ..features import FULL_DIM, GROUP_SLICES
from .events import ACTIVITIES, COMPONENTS, POST_TOR_S, PRE_TOR_S, TakeoverEvent, frame_count

ACTIVITY_COUNTS = {
    "none": 308,
    "talking": 182,
    "eyes_closed": 85,
    "texting": 262,
    "phone_call": 42,
    "infotainment": 262,
    "counting_coins": 97,
    "reading": 100,
}

# mean (eyes, foot, hands) seconds; distracting activities are slower, hands slowest
DEFAULT_TIME_MEANS = {
    "none": (0.35, 0.55, 0.90),
    "talking": (0.45, 0.65, 1.00),
    "eyes_closed": (0.50, 0.60, 1.00),
    "texting": (0.75, 0.95, 1.75),
    "phone_call": (0.65, 0.90, 1.60),
    "infotainment": (0.45, 0.65, 1.10),
    "counting_coins": (0.70, 1.00, 1.80),
    "reading": (0.80, 1.00, 1.90),
}

DEFAULT_DISTRACTED_DIST_M = {
    "none": 0.25,
    "talking": 0.35,
    "eyes_closed": 0.40,
    "texting": 0.50,
    "phone_call": 0.55,
    "infotainment": 0.45,
    "counting_coins": 0.50,
    "reading": 0.50,
}


def _dist(size, **entries):
    v = np.full(size, 0.02)
    for idx, p in entries.items():
        v[int(idx[1:])] = p
    return v / v.sum()


# indices: gaze (forward, left_mirror, lap, speedometer, infotainment, rearview, right_mirror, over_shoulder)
READY_GAZE = _dist(8, i0=0.9, i3=0.05)
DISTRACTED_GAZE = {
    "none": _dist(8, i0=0.55, i3=0.15, i5=0.1, i1=0.1, i6=0.1),
    "talking": _dist(8, i0=0.3, i6=0.3, i7=0.3, i5=0.1),
    "eyes_closed": _dist(8, i2=0.9),
    "texting": _dist(8, i2=0.85, i0=0.1),
    "phone_call": _dist(8, i0=0.35, i1=0.3, i2=0.25),
    "infotainment": _dist(8, i4=0.7, i0=0.2),
    "counting_coins": _dist(8, i2=0.8, i4=0.1),
    "reading": _dist(8, i2=0.9),
}
# hand activity (lap, air, hovering_wheel, wheel, cupholder, infotainment), (left, right)
READY_HAND = (_dist(6, i3=0.85, i2=0.1), _dist(6, i3=0.85, i2=0.1))
DISTRACTED_HAND = {
    "none": (_dist(6, i0=0.5, i2=0.3), _dist(6, i0=0.5, i2=0.3)),
    "talking": (_dist(6, i0=0.6, i1=0.3), _dist(6, i0=0.5, i1=0.4)),
    "eyes_closed": (_dist(6, i0=0.8), _dist(6, i0=0.8)),
    "texting": (_dist(6, i1=0.7, i0=0.2), _dist(6, i1=0.8)),
    "phone_call": (_dist(6, i1=0.85), _dist(6, i0=0.7)),
    "infotainment": (_dist(6, i0=0.6, i2=0.2), _dist(6, i5=0.8)),
    "counting_coins": (_dist(6, i1=0.5, i0=0.3), _dist(6, i4=0.7, i1=0.2)),
    "reading": (_dist(6, i1=0.6, i0=0.3), _dist(6, i1=0.6, i0=0.3)),
}
# held object (none, phone, tablet, food, beverage, book, other), (left, right)
READY_OBJECT = (_dist(7, i0=0.95), _dist(7, i0=0.95))
_NO_OBJECT = (_dist(7, i0=0.9), _dist(7, i0=0.9))
DISTRACTED_OBJECT = {
    "none": _NO_OBJECT,
    "talking": (_dist(7, i0=0.8, i4=0.15), _dist(7, i0=0.85, i3=0.1)),
    "eyes_closed": _NO_OBJECT,
    "texting": (_dist(7, i1=0.6, i2=0.2), _dist(7, i1=0.8)),
    "phone_call": (_dist(7, i1=0.85), _dist(7, i0=0.8)),
    "infotainment": _NO_OBJECT,
    "counting_coins": (_dist(7, i6=0.5, i0=0.3), _dist(7, i6=0.8)),
    "reading": (_dist(7, i5=0.8), _dist(7, i5=0.8)),
}
# foot (away, brake, gas, hover_brake, hover_gas)
READY_FOOT = _dist(5, i2=0.45, i4=0.3, i1=0.1, i3=0.1)
DISTRACTED_FOOT = {a: _dist(5, i0=0.85, i4=0.1) for a in ACTIVITIES}
DISTRACTED_FOOT["none"] = _dist(5, i0=0.5, i4=0.3)
READY_DIST_M = 0.05


@dataclass
class SynthConfig:
    counts: dict = field(default_factory=lambda: dict(ACTIVITY_COUNTS))
    time_means: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_TIME_MEANS.items()})
    time_spread: float = 0.35  # log-normal sigma of component times
    time_correlation: float = 0.5  # shared factor between an event's three times
    distracted_dist_m: dict = field(default_factory=lambda: dict(DEFAULT_DISTRACTED_DIST_M))
    kappa_s: float = 1.0  # remaining-time scale of the distraction level
    perception_noise: float = 0.15  # log-sd of the per-event perceived remaining time
    logit_noise: float = 0.4
    noise_corr: float = 0.8  # AR(1) coefficient of the per-frame noise
    dist_noise_m: float = 0.03
    frame_rate_hz: float = 30.0
    max_time_s: float = 9.0
    seed: int = 0

    def validate(self) -> None:
        unknown = set(self.counts) - set(ACTIVITIES)
        if unknown:
            raise ValueError(f"unknown activities in counts: {sorted(unknown)}; valid labels: {', '.join(ACTIVITIES)}")
        if any(int(c) <= 0 for c in self.counts.values()) or not self.counts:
            raise ValueError("event counts must be positive")
        for act in self.counts:
            if act not in self.time_means or len(self.time_means[act]) != 3:
                raise ValueError(f"time_means needs three values for {act}")
            if act not in self.distracted_dist_m:
                raise ValueError(f"distracted_dist_m missing {act}")
        if not 0 < self.max_time_s <= POST_TOR_S:
            raise ValueError("max_time_s must lie in (0, 10]")
        if self.frame_rate_hz <= 0 or self.kappa_s <= 0:
            raise ValueError("frame rate and kappa must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def remaining_time(times, timestamps) -> np.ndarray:
    """Latent ``(n, 3)`` remaining time per component at each timestamp."""
    times = np.asarray(times, dtype=float)
    ts = np.asarray(timestamps, dtype=float)[:, None]
    return np.where(ts <= 0, times[None, :], np.maximum(times[None, :] - ts, 0.0))


def distraction_level(times, timestamps, kappa_s: float = 1.0) -> np.ndarray:
    return 1.0 - np.exp(-remaining_time(times, timestamps) / kappa_s)


def _ar_noise(rng, n, d, sigma, rho):
    white = rng.standard_normal((n, d)) * sigma * np.sqrt(1 - rho**2)
    return lfilter([1.0], [1.0, -rho], white, axis=0)


def _emit(lam, ready, distracted, noise):
    mix = (1 - lam)[:, None] * ready[None, :] + lam[:, None] * distracted[None, :]
    logits = np.log(mix) + noise
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def _draw_times(rng, cfg: SynthConfig, activity: str) -> np.ndarray:
    means = np.asarray(cfg.time_means[activity], dtype=float)
    s, rho = cfg.time_spread, cfg.time_correlation
    z = rho * rng.standard_normal() + np.sqrt(1 - rho**2) * rng.standard_normal(3)
    t = means * np.exp(s * z - 0.5 * s**2)
    t = np.clip(t, 0.0, cfg.max_time_s)
    return np.round(t * cfg.frame_rate_hz) / cfg.frame_rate_hz


def synthesize_event(cfg: SynthConfig, activity: str, index: int, event_id: str | None = None) -> TakeoverEvent:
    rng = np.random.default_rng([cfg.seed, index])
    fps = cfg.frame_rate_hz
    n = frame_count(PRE_TOR_S + POST_TOR_S, fps)
    tor = frame_count(PRE_TOR_S, fps)
    timestamps = (np.arange(n) - tor) / fps
    times = _draw_times(rng, cfg, activity)

    perceived = times * np.exp(cfg.perception_noise * rng.standard_normal(3))
    lam = distraction_level(perceived, timestamps, cfg.kappa_s)
    lam_e, lam_f, lam_h = lam.T

    noise = _ar_noise(rng, n, FULL_DIM, cfg.logit_noise, cfg.noise_corr)
    frames = np.empty((n, FULL_DIM))
    sl = GROUP_SLICES
    frames[:, sl["foot"]] = _emit(lam_f, READY_FOOT, DISTRACTED_FOOT[activity], noise[:, sl["foot"]])
    frames[:, sl["gaze"]] = _emit(lam_e, READY_GAZE, DISTRACTED_GAZE[activity], noise[:, sl["gaze"]])
    h0 = sl["hand"].start
    for side in range(2):
        cols = slice(h0 + 6 * side, h0 + 6 * (side + 1))
        frames[:, cols] = _emit(lam_h, READY_HAND[side], DISTRACTED_HAND[activity][side], noise[:, cols])
    o0 = sl["object"].start
    for side in range(2):
        cols = slice(o0 + 7 * side, o0 + 7 * (side + 1))
        frames[:, cols] = _emit(lam_h, READY_OBJECT[side], DISTRACTED_OBJECT[activity][side], noise[:, cols])
    far = cfg.distracted_dist_m[activity]
    dist_noise = _ar_noise(rng, n, 2, cfg.dist_noise_m, cfg.noise_corr)
    side_scale = np.array([0.9, 1.1])
    dist = READY_DIST_M + lam_h[:, None] * (far - READY_DIST_M) * side_scale[None, :] + dist_noise
    frames[:, sl["stereo"]] = np.maximum(dist, 0.0)

    # 7 decimals keeps every distribution summing to 1 within 5e-7 and
    # makes the decimal form in event files exact.
    frames = np.round(frames, 7)

    return TakeoverEvent(
        event_id=event_id or f"syn{index:05d}",
        activity=activity,
        t_eyes_s=float(times[0]),
        t_foot_s=float(times[1]),
        t_hands_s=float(times[2]),
        frames=frames,
        timestamps=timestamps,
        frame_rate_hz=fps,
    )


def scaled_counts(total: int, counts=ACTIVITY_COUNTS) -> dict:
    """Activity counts with the same proportions as ``counts`` summing to ``total``."""
    if total < len(counts):
        raise ValueError(f"need at least {len(counts)} events to keep every activity")
    names = list(counts)
    n = sum(counts.values())
    raw = np.array([counts[a] * total / n for a in names])
    out = np.maximum(np.floor(raw).astype(int), 1)
    for i in np.argsort(-(raw - np.floor(raw)), kind="stable"):
        if out.sum() >= total:
            break
        out[i] += 1
    while out.sum() > total:
        out[np.argmax(out)] -= 1
    return {a: int(c) for a, c in zip(names, out)}


def synthesize_events(cfg: SynthConfig) -> list[TakeoverEvent]:
    cfg.validate()
    events = []
    for act in ACTIVITIES:
        for _ in range(int(cfg.counts.get(act, 0))):
            events.append(synthesize_event(cfg, act, len(events)))
    return events


def time_statistics(events) -> dict:
    """Per-activity count and mean/std of each component time and of TOT."""
    stats = {}
    for act in ACTIVITIES:
        sel = [ev for ev in events if ev.activity == act]
        if not sel:
            continue
        t = np.array([ev.times for ev in sel])
        tot = t.max(axis=1)
        row = {"count": len(sel)}
        for i, name in enumerate(COMPONENTS):
            row[name] = (float(t[:, i].mean()), float(t[:, i].std()))
        row["takeover"] = (float(tot.mean()), float(tot.std()))
        stats[act] = row
    return stats


# ---------------------------------------------------------------------------
# simulated observable-readiness ratings


def ori_windows(events, stride_frames: int = 10, tail_s: float = 2.0):
    """Window end indices used for readiness labels: from the request until
    ``tail_s`` after the last component completes, every ``stride_frames``."""
    out = []
    for ev in events:
        last = min(ev.tor_index + frame_count(ev.t_max + tail_s, ev.frame_rate_hz), len(ev.frames))
        for end in range(ev.tor_index, last + 1, stride_frames):
            out.append((ev, end))
    return out


def synthesize_ori_labels(events, seed: int = 0, stride_frames: int = 10, kappa_s: float = 1.0,
                          n_raters: int = 3, rater_bias: float = 0.1, rater_noise: float = 0.03):
    """Readiness labels in [0, 1] for windows from :func:`ori_windows`.

    The underlying readiness is one minus the window-averaged latent
    distraction. Each simulated rater adds a personal bias and per-window
    noise; biases are removed by centring each rater on the pooled mean
    before averaging.

    Returns ``(windows, labels)`` where ``windows`` is a list of
    ``(event, end_index)`` pairs.
    """
    windows = ori_windows(events, stride_frames)
    if not windows:
        return [], np.zeros(0)
    base = np.empty(len(windows))
    for i, (ev, end) in enumerate(windows):
        lo = end - ev.window_frames
        lam = distraction_level(ev.times, ev.timestamps[lo:end], kappa_s)
        base[i] = 1.0 - lam.mean()
    rng = np.random.default_rng(seed)
    bias = rng.normal(0.0, rater_bias, size=n_raters)
    ratings = base[None, :] + bias[:, None] + rng.normal(0.0, rater_noise, size=(n_raters, len(base)))
    ratings -= ratings.mean(axis=1, keepdims=True) - ratings.mean()
    labels = np.clip(ratings.mean(axis=0), 0.0, 1.0)
    return windows, labels
