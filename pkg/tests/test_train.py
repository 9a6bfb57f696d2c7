import numpy as np
import pytest

from takeover.dataset import build_training_set, synthesize_ori_labels, window_at
from takeover.features import FeatureMask
from takeover.model import (
    BASELINE,
    BASELINE_MM,
    INDEPENDENT,
    ModelConfig,
    TrainConfig,
    init_model,
    pretrain_ori,
    train,
    transfer,
)


def small_cfg(variant=BASELINE, dim=41, **kw):
    return ModelConfig(variant=variant, input_dim=dim, hidden_dim=kw.pop("hidden_dim", 6), **kw)


def test_history_has_one_row_per_epoch(events):
    samples = build_training_set(events[:6], augment=False)
    model, hist = train(samples, samples[:3], small_cfg(), TrainConfig(epochs=3))
    assert len(hist) == 3
    assert [r["epoch"] for r in hist.rows] == [1, 2, 3]
    assert {"train_loss", "val_overall", "val_takeover"} <= set(hist[0])
    assert all(v.dtype == np.float64 for v in model.params.values())


@pytest.mark.parametrize("precision", ["float32", "float64"])
def test_training_is_reproducible(events, precision):
    samples = build_training_set(events[:4])
    tc = TrainConfig(epochs=1, seed=3, precision=precision)
    a, ha = train(samples, None, small_cfg(INDEPENDENT), tc)
    b, hb = train(samples, None, small_cfg(INDEPENDENT), tc)
    assert ha.rows == hb.rows
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_loss_decreases(events):
    samples = build_training_set(events[:8])
    _, hist = train(samples, None, small_cfg(BASELINE_MM), TrainConfig(epochs=4, lr=3e-3))
    losses = hist.train_losses()
    assert losses[-1] < losses[0]


def test_mask_dimension_checked(events):
    samples = build_training_set(events[:2], augment=False)
    with pytest.raises(ValueError, match="gives 8 inputs"):
        train(samples, None, small_cfg(dim=41), TrainConfig(epochs=1), FeatureMask.from_label("G"))
    model, _ = train(samples, None, small_cfg(dim=8), TrainConfig(epochs=1), FeatureMask.from_label("G"))
    assert model.params["in.W"].shape[0] == 8


def test_empty_training_set():
    with pytest.raises(ValueError, match="empty"):
        train([], None, small_cfg(), TrainConfig(epochs=1))


def test_pretrain_and_transfer(events):
    wins, labels = synthesize_ori_labels(events[:3], seed=0)
    windows = [window_at(ev, end) for ev, end in wins]
    cfg = small_cfg(INDEPENDENT)
    ori, hist = pretrain_ori(windows, labels, cfg, TrainConfig(epochs=1))
    assert ori.task == "ori" and len(hist) == 1
    tot = transfer(ori, small_cfg(INDEPENDENT), seed=5)
    for k in ori.trunk_names():
        assert np.array_equal(tot.params[k], ori.params[k])
        assert not np.shares_memory(tot.params[k], ori.params[k])
    assert "out.W" in tot.params and "ori.W" not in tot.params
    with pytest.raises(ValueError, match="incompatible trunk"):
        transfer(ori, small_cfg(BASELINE))
    with pytest.raises(ValueError, match="incompatible trunk"):
        transfer(ori, small_cfg(INDEPENDENT, hidden_dim=7))


def test_ori_labels_range_checked(events):
    wins, labels = synthesize_ori_labels(events[:1])
    windows = [window_at(ev, end) for ev, end in wins]
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        pretrain_ori(windows, labels + 2, small_cfg(), TrainConfig(epochs=1))


def test_fine_tune_keeps_given_model(events):
    samples = build_training_set(events[:2], augment=False)
    m0 = init_model(small_cfg(), seed=11)
    start = m0.params["in.W"].copy()
    m1, _ = train(samples, None, small_cfg(), TrainConfig(epochs=1), model=m0)
    assert m1 is m0
    assert not np.array_equal(m1.params["in.W"], start)
