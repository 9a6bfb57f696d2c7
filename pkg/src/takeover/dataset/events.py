"""Take-over events, training samples and the event file format.

Event files are line-delimited JSON, one event per line::

    {"event_id": "e0001", "activity": "texting", "frame_rate_hz": 30,
     "t_eyes_s": 0.7, "t_foot_s": 0.9, "t_hands_s": 1.6,
     "frames": [[f0, ..., f40, timestamp_s], ...]}

Each ``frames`` row holds the 41 feature values in canonical F, G, H, S, O
order followed by the frame timestamp relative to the take-over request.
Floats are written with ``repr`` so a save/load round trip is exact.
Paths ending in ``.gz`` are transparently gzip-compressed.
"""

from __future__ import annotations

import gzip
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..features import FULL_DIM, FrameFeatures, validate_matrix

ACTIVITIES = (
    "none",
    "talking",
    "eyes_closed",
    "texting",
    "phone_call",
    "infotainment",
    "counting_coins",
    "reading",
)

PRE_TOR_S = 20.0
POST_TOR_S = 10.0
WINDOW_S = 2.0
COMPONENTS = ("eyes", "foot", "hands")

# Slack when converting frame-aligned times to frame counts: k/30 is not exactly
# representable, so k/30*30 can land just below k.
FRAME_EPS = 1e-6


class EventFormatError(ValueError):
    pass


def frame_count(seconds: float, fps: float) -> int:
    """Number of whole frames in ``seconds`` (floor with float slack)."""
    return int(math.floor(seconds * fps + FRAME_EPS))


@dataclass
class TakeoverEvent:
    event_id: str
    activity: str
    t_eyes_s: float
    t_foot_s: float
    t_hands_s: float
    frames: np.ndarray  # (n, 41)
    timestamps: np.ndarray  # (n,), seconds relative to TOR
    frame_rate_hz: float = 30.0

    @property
    def times(self) -> np.ndarray:
        return np.array([self.t_eyes_s, self.t_foot_s, self.t_hands_s])

    @property
    def t_max(self) -> float:
        return max(self.t_eyes_s, self.t_foot_s, self.t_hands_s)

    @property
    def tor_index(self) -> int:
        """Index of the first frame at or after the take-over request."""
        return frame_count(PRE_TOR_S, self.frame_rate_hz)

    @property
    def window_frames(self) -> int:
        return frame_count(WINDOW_S, self.frame_rate_hz)

    def frame(self, j: int) -> FrameFeatures:
        return FrameFeatures.from_vector(self.frames[j], self.timestamps[j])

    def problems(self) -> list[str]:
        out = []
        if self.activity not in ACTIVITIES:
            out.append(f"unknown activity {self.activity!r}; valid labels: {', '.join(ACTIVITIES)}")
        if not (self.frame_rate_hz > 0 and math.isfinite(self.frame_rate_hz)):
            out.append(f"frame rate must be positive, got {self.frame_rate_hz}")
            return out
        for name, t in zip(COMPONENTS, self.times):
            if not math.isfinite(t) or t < 0:
                out.append(f"t_{name}_s must be finite and >= 0, got {t}")
            elif t > POST_TOR_S:
                out.append(f"t_{name}_s = {t} exceeds the {POST_TOR_S:g} s post-TOR span")
        n_expected = frame_count(PRE_TOR_S + POST_TOR_S, self.frame_rate_hz)
        if self.frames.shape != (n_expected, FULL_DIM):
            out.append(f"frames must have shape ({n_expected}, {FULL_DIM}), got {self.frames.shape}")
            return out
        if self.timestamps.shape != (n_expected,):
            out.append("timestamps length does not match frames")
            return out
        expected_ts = (np.arange(n_expected) - self.tor_index) / self.frame_rate_hz
        if not np.allclose(self.timestamps, expected_ts, atol=1e-6, rtol=0):
            out.append("frames are not uniformly sampled from -20 s at the stated frame rate")
        out.extend(f"{v.group}: {v.message}" for v in validate_matrix(self.frames))
        return out

    def validate(self) -> None:
        probs = self.problems()
        if probs:
            raise EventFormatError(f"event {self.event_id}: " + "; ".join(probs))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TakeoverEvent):
            return NotImplemented
        return (
            self.event_id == other.event_id
            and self.activity == other.activity
            and self.frame_rate_hz == other.frame_rate_hz
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.timestamps, other.timestamps)
        )


@dataclass
class TrainingSample:
    window: np.ndarray  # (window_frames, 41), usually a view into the event's frames
    targets: np.ndarray  # (3,) eyes, foot, hands
    event_id: str
    activity: str
    offset_s: float = 0.0  # 0 for raw samples
    end_index: int = 0  # exclusive end frame index in the source event

    @property
    def augmented(self) -> bool:
        return self.offset_s > 0


def stack_samples(samples, columns=None) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into ``(N, T, D)`` windows and ``(N, 3)`` targets."""
    if not samples:
        raise ValueError("no samples to stack")
    X = np.stack([s.window for s in samples])
    if columns is not None:
        X = X[..., columns]
    Y = np.stack([s.targets for s in samples])
    return X, Y


# ---------------------------------------------------------------------------
# file I/O


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def event_to_record(event: TakeoverEvent) -> dict:
    rows = np.concatenate([event.frames, event.timestamps[:, None]], axis=1)
    return {
        "event_id": event.event_id,
        "activity": event.activity,
        "frame_rate_hz": event.frame_rate_hz,
        "t_eyes_s": event.t_eyes_s,
        "t_foot_s": event.t_foot_s,
        "t_hands_s": event.t_hands_s,
        "frames": rows.tolist(),
    }


def event_from_record(rec: dict) -> TakeoverEvent:
    if not isinstance(rec, dict):
        raise EventFormatError("record is not a JSON object")
    missing = [k for k in ("event_id", "activity", "t_eyes_s", "t_foot_s", "t_hands_s", "frames") if k not in rec]
    if missing:
        raise EventFormatError(f"missing fields: {', '.join(missing)}")
    if rec["activity"] not in ACTIVITIES:
        raise EventFormatError(f"unknown activity {rec['activity']!r}; valid labels: {', '.join(ACTIVITIES)}")
    try:
        rows = np.asarray(rec["frames"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise EventFormatError(f"frames are not a numeric matrix: {exc}") from None
    if rows.ndim != 2 or rows.shape[1] != FULL_DIM + 1:
        raise EventFormatError(f"frame rows must have {FULL_DIM + 1} values (41 features + timestamp)")
    event = TakeoverEvent(
        event_id=str(rec["event_id"]),
        activity=rec["activity"],
        t_eyes_s=float(rec["t_eyes_s"]),
        t_foot_s=float(rec["t_foot_s"]),
        t_hands_s=float(rec["t_hands_s"]),
        frames=np.ascontiguousarray(rows[:, :FULL_DIM]),
        timestamps=np.ascontiguousarray(rows[:, FULL_DIM]),
        frame_rate_hz=float(rec.get("frame_rate_hz", 30.0)),
    )
    event.validate()
    return event


def _write_events(fh, events) -> None:
    for ev in events:
        fh.write(json.dumps(event_to_record(ev), separators=(",", ":")))
        fh.write("\n")


def save_events(events, path) -> None:
    """Write events atomically (temp file, then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    if path.suffix == ".gz":
        # no embedded name and a fixed mtime keep the bytes a function of the events only
        with open(tmp, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz, \
                io.TextIOWrapper(gz, encoding="utf-8") as fh:
            _write_events(fh, events)
    else:
        with open(tmp, "w", encoding="utf-8") as fh:
            _write_events(fh, events)
    os.replace(tmp, path)


def load_events(path) -> list[TakeoverEvent]:
    events = []
    seen = set()
    with _open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ev = event_from_record(rec)
            except json.JSONDecodeError as exc:
                raise EventFormatError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
            except EventFormatError as exc:
                raise EventFormatError(f"{path}:{lineno}: {exc}") from None
            if ev.event_id in seen:
                raise EventFormatError(f"{path}:{lineno}: duplicate event_id {ev.event_id}")
            seen.add(ev.event_id)
            events.append(ev)
    return events
