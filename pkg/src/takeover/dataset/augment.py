"""Raw and TOR-offset augmented training samples.

A raw sample pairs the 2 s of features before the take-over request with the
annotated component times. An augmented sample pretends the request arrived
``k`` frames later: the window slides forward by ``k`` frames and every
component time shrinks by ``k / fps``, clamped at zero once that component
has already completed.
"""

from __future__ import annotations

import numpy as np

from .events import TakeoverEvent, TrainingSample, frame_count


class WindowRangeError(ValueError):
    pass


def window_at(event: TakeoverEvent, end_index: int) -> np.ndarray:
    """Frames ``[end_index - window, end_index)`` as a view into the event."""
    start = end_index - event.window_frames
    if start < 0 or end_index > len(event.frames):
        raise WindowRangeError(
            f"event {event.event_id}: window ending at frame {end_index} lies outside the recorded span"
        )
    return event.frames[start:end_index]


def make_raw_sample(event: TakeoverEvent) -> TrainingSample:
    end = event.tor_index
    return TrainingSample(
        window=window_at(event, end),
        targets=event.times.copy(),
        event_id=event.event_id,
        activity=event.activity,
        offset_s=0.0,
        end_index=end,
    )


def n_augmented(event: TakeoverEvent) -> int:
    return frame_count(event.t_max, event.frame_rate_hz)


def augment_event(event: TakeoverEvent) -> list[TrainingSample]:
    """One sample per frame offset in ``(0, t_max]``; the raw sample is excluded."""
    n = n_augmented(event)
    if n == 0:
        return []
    last_end = event.tor_index + n
    if last_end > len(event.frames):
        raise WindowRangeError(
            f"event {event.event_id}: augmenting to t_max={event.t_max} s runs past the recorded span"
        )
    times = event.times
    out = []
    for k in range(1, n + 1):
        t_off = k / event.frame_rate_hz
        end = event.tor_index + k
        out.append(
            TrainingSample(
                window=event.frames[end - event.window_frames : end],
                targets=np.maximum(times - t_off, 0.0),
                event_id=event.event_id,
                activity=event.activity,
                offset_s=t_off,
                end_index=end,
            )
        )
    return out


def build_training_set(events, augment: bool = True) -> list[TrainingSample]:
    """Raw samples for every event, plus augmented ones when ``augment`` is set.

    Only ever call this on the training split; validation and test data stay raw.
    """
    seen = set()
    samples = []
    for ev in events:
        if ev.event_id in seen:
            raise ValueError(f"duplicate event_id {ev.event_id}")
        seen.add(ev.event_id)
        samples.append(make_raw_sample(ev))
        if augment:
            samples.extend(augment_event(ev))
    return samples


def raw_samples(events) -> list[TrainingSample]:
    return [make_raw_sample(ev) for ev in events]


def expected_size(events, augment: bool = True) -> int:
    return sum(1 + (n_augmented(ev) if augment else 0) for ev in events)
