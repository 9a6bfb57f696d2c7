from .augment import (
    WindowRangeError,
    augment_event,
    build_training_set,
    expected_size,
    make_raw_sample,
    raw_samples,
    window_at,
)
from .events import (
    ACTIVITIES,
    COMPONENTS,
    EventFormatError,
    TakeoverEvent,
    TrainingSample,
    load_events,
    save_events,
    stack_samples,
)
from .splits import split_events, subsample
from .synth import SynthConfig, scaled_counts, synthesize_events, synthesize_ori_labels, time_statistics

__all__ = [
    "ACTIVITIES",
    "COMPONENTS",
    "EventFormatError",
    "SynthConfig",
    "TakeoverEvent",
    "TrainingSample",
    "WindowRangeError",
    "augment_event",
    "build_training_set",
    "expected_size",
    "load_events",
    "make_raw_sample",
    "raw_samples",
    "save_events",
    "scaled_counts",
    "split_events",
    "stack_samples",
    "subsample",
    "synthesize_events",
    "synthesize_ori_labels",
    "time_statistics",
    "window_at",
]
