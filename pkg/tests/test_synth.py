import numpy as np
import pytest

from takeover.dataset import SynthConfig, scaled_counts, synthesize_events, synthesize_ori_labels, time_statistics
from takeover.dataset.synth import ACTIVITY_COUNTS, distraction_level, ori_windows, remaining_time, synthesize_event


def test_table_counts_sum():
    assert sum(ACTIVITY_COUNTS.values()) == 1338


@pytest.mark.parametrize("total", [8, 100, 1000, 1338])
def test_scaled_counts(total):
    c = scaled_counts(total)
    assert sum(c.values()) == total
    assert all(v >= 1 for v in c.values())
    assert scaled_counts(1338) == ACTIVITY_COUNTS


def test_events_valid_and_deterministic(events):
    for ev in events:
        assert ev.problems() == []
    again = synthesize_events(SynthConfig(counts=scaled_counts(40), seed=7))
    assert again == events
    other = synthesize_event(SynthConfig(seed=8), events[0].activity, 0)
    assert other != events[0]


def test_times_are_frame_aligned(events):
    t = np.array([ev.times for ev in events])
    assert np.allclose(t * 30, np.round(t * 30), atol=1e-9)
    assert np.all((t >= 0) & (t <= 9))


def test_remaining_time_and_distraction():
    ts = np.array([-1.0, 0.0, 0.5, 2.0])
    r = remaining_time([1.0, 0.2, 3.0], ts)
    assert r[:, 0] == pytest.approx([1.0, 1.0, 0.5, 0.0])
    lam = distraction_level([1.0, 0.2, 3.0], ts)
    assert np.all(np.diff(lam, axis=0) <= 0)
    assert lam[3, 0] == 0.0


def test_features_track_readiness(events):
    # gaze on the road (first zone) should rise after the request
    pre = np.mean([ev.frames[540:600, 5].mean() for ev in events])
    post = np.mean([ev.frames[600 + int(ev.t_eyes_s * 30) + 30 :][:30, 5].mean() for ev in events])
    assert post > pre + 0.2


def test_time_statistics(events):
    stats = time_statistics(events)
    assert sum(s["count"] for s in stats.values()) == len(events)
    for row in stats.values():
        assert row["takeover"][0] >= max(row[k][0] for k in ("eyes", "foot", "hands")) - 1e-12


def test_ori_labels(events):
    wins, labels = synthesize_ori_labels(events[:5], seed=0)
    assert len(wins) == len(labels) == len(ori_windows(events[:5]))
    assert np.all((labels >= 0) & (labels <= 1))
    # readiness grows after the request on average
    first = [labels[i] for i, (ev, end) in enumerate(wins) if end == ev.tor_index]
    assert np.mean(first) < np.mean(labels)


def test_config_validation():
    with pytest.raises(ValueError, match="unknown activities"):
        SynthConfig(counts={"juggling": 3}).validate()
    with pytest.raises(ValueError):
        SynthConfig(max_time_s=12).validate()
    cfg = SynthConfig(seed=3)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg
