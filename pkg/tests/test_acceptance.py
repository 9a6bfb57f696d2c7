"""Acceptance suite: one test per primary criterion, each printing a PASS/FAIL line.

Run on its own with ``python3 -m pytest tests/test_acceptance.py -v -s`` or
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import math
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracle import finite_difference, ref_loss, rel_error  # noqa: E402
from takeover.dataset import (  # noqa: E402
    SynthConfig,
    augment_event,
    build_training_set,
    raw_samples,
    scaled_counts,
    split_events,
    synthesize_events,
    synthesize_ori_labels,
    window_at,
)
from takeover.decision import HAND_OVER, SAFE_STOP, decide, stream_predict  # noqa: E402
from takeover.eval import AblationSpec, ablate, compare_augmentation, evaluate  # noqa: E402
from takeover.features import SINGLE_GROUP_LABELS  # noqa: E402
from takeover.model import (  # noqa: E402
    BASELINE,
    INDEPENDENT,
    ModelConfig,
    Prediction,
    TrainConfig,
    VARIANTS,
    init_model,
    loss_and_grad,
    loss_l1,
    loss_min_of_k,
    pretrain_ori,
    train,
    transfer,
)
from takeover.model.losses import min_of_k_terms  # noqa: E402

TREND_SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture
def report(capsys):
    """``report(name, ok, detail)`` prints one line and fails the test when ``ok`` is false."""

    def _report(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return _report


def brute_force_offsets(ev):
    """Every frame offset k >= 1 whose time k/30 does not exceed the slowest component."""
    return [k for k in range(1, 301) if k / ev.frame_rate_hz <= ev.t_max]


# ---------------------------------------------------------------------------


def test_gradient_oracle(report):
    """Analytic gradients vs central differences of an independent reference network."""
    t0 = time.time()
    worst, n_checks = 0.0, 0
    configs = [dict(D=4, H=3, T=5, N=3, K=3), dict(D=6, H=2, T=7, N=2, K=2), dict(D=3, H=4, T=4, N=4, K=4)]
    for variant in VARIANTS:
        for i, c in enumerate(configs):
            cfg = ModelConfig(variant=variant, input_dim=c["D"], hidden_dim=c["H"], num_modes=c["K"],
                              window_frames=c["T"], seed=i)
            m = init_model(cfg)
            r = np.random.default_rng(100 + i)
            for v in m.params.values():
                v += r.normal(scale=0.5, size=v.shape)
            X = r.normal(size=(c["N"], c["T"], c["D"]))
            Y = r.uniform(0.1, 2.0, size=(c["N"], 3))
            _, g = loss_and_grad(m, X, Y)
            fd = finite_difference(
                lambda p: ref_loss(p, cfg.n_cells, cfg.multimodal, "tot", X, Y, c["K"]), m.params
            )
            worst = max(worst, max(rel_error(g[k], fd[k]) for k in g))
            n_checks += 1
    elapsed = time.time() - t0
    report(
        "gradient oracle",
        worst < 1e-4 and elapsed < 60,
        f"{n_checks} variant/config checks (L1 for point variants, min-of-K for multimodal), "
        f"max rel err {worst:.2e} < 1e-4, {elapsed:.1f} s < 60 s",
    )


def test_augmentation_law(report):
    events = synthesize_events(SynthConfig(counts=scaled_counts(200), seed=11))
    bad = []
    for ev in events:
        aug = augment_event(ev)
        ks = brute_force_offsets(ev)
        if len(aug) != len(ks) or len(aug) != math.floor(ev.t_max * 30 + 1e-6):
            bad.append((ev.event_id, "count"))
            continue
        for s, k in zip(aug, ks):
            expect = np.array([max(t - k / 30, 0.0) for t in ev.times])
            clamp_ok = all((s.targets[c] == 0.0) == (k / 30 >= ev.times[c]) for c in range(3))
            same = (
                np.array_equal(s.targets, expect)
                and s.offset_s == k / 30
                and np.array_equal(s.window, ev.frames[600 + k - 60 : 600 + k])
            )
            if not (clamp_ok and same):
                bad.append((ev.event_id, k))
    n = sum(len(brute_force_offsets(ev)) for ev in events)
    report("augmentation law", not bad, f"200 events, {n} augmented samples checked, {len(bad)} mismatches")


def test_dataset_size(report):
    events = synthesize_events(SynthConfig(counts=scaled_counts(120), seed=12))
    train_ev, _, _ = split_events(events)
    total = len(build_training_set(train_ev, augment=True))
    expected = sum(1 + len(brute_force_offsets(ev)) for ev in train_ev)
    formula = sum(1 + math.floor(ev.t_max * 30 + 1e-6) for ev in train_ev)
    report(
        "dataset size",
        total == expected == formula,
        f"{len(train_ev)} train events -> {total} samples, expected {expected}",
    )


def test_loss_identities(report):
    r = np.random.default_rng(5)
    problems = 0
    for _ in range(1000):
        N, K = r.integers(1, 6), r.integers(2, 6)
        t = r.uniform(0, 5, size=(N, 3))
        if loss_l1(Prediction(times=t.copy()), t) != 0.0:
            problems += 1
        modes = r.uniform(0, 5, size=(N, K, 3))
        logits = r.normal(scale=2, size=(N, K))
        reg, cls, best = min_of_k_terms(modes, logits, t)
        for n in range(N):
            per_mode = [float(np.abs(modes[n, k] - t[n]).sum()) for k in range(K)]
            kstar = per_mode.index(min(per_mode))
            q = math.exp(logits[n, kstar]) / sum(math.exp(z) for z in logits[n])
            if reg[n] > min(per_mode) + 1e-12 or any(reg[n] > e + 1e-12 for e in per_mode):
                problems += 1
            if best[n] != kstar or abs(cls[n] - (-math.log(max(q, 1e-9)))) > 1e-9:
                problems += 1
        total = loss_min_of_k(Prediction(modes=modes, probs=None, logits=logits), t)
        if abs(total - float(np.mean(reg + cls))) > 1e-12:
            problems += 1
    report("loss identities", problems == 0, f"1000 random cases, {problems} violations")


def test_overfit_smoke(report):
    t0 = time.time()
    events = synthesize_events(SynthConfig(counts=scaled_counts(10), seed=13))
    samples = raw_samples(events)
    cfg = ModelConfig(variant=BASELINE, hidden_dim=32, seed=0)
    model, _ = train(samples, None, cfg, TrainConfig(epochs=400, lr=1e-2, batch_size=10, seed=0))
    mae = evaluate(model, samples).overall_mae_s
    elapsed = time.time() - t0
    report("overfit smoke test", mae < 0.05 and elapsed < 60,
           f"baseline LSTM on 10 samples: overall MAE {mae:.4f} s < 0.05 s in {elapsed:.1f} s < 60 s")


@pytest.mark.slow
def test_trend_augmentation(report):
    t0 = time.time()
    events = synthesize_events(SynthConfig(counts=scaled_counts(1000), seed=1))
    wins, rows = 0, []
    for seed in TREND_SEEDS:
        raw, aug = compare_augmentation(events, ModelConfig(variant=INDEPENDENT, hidden_dim=8),
                                        TrainConfig(epochs=10), seed=seed)
        wins += aug.overall_mae_s < raw.overall_mae_s
        rows.append(f"{raw.overall_mae_s:.3f}->{aug.overall_mae_s:.3f}")
    elapsed = time.time() - t0
    report("trend: augmented beats raw (ID LSTMs)", wins >= 4 and elapsed < 600,
           f"{wins}/5 seeds, raw->augmented overall val MAE [{', '.join(rows)}], {elapsed:.0f} s < 600 s")


def test_trend_best_of_k(report):
    events = synthesize_events(SynthConfig(counts=scaled_counts(200), seed=3))
    train_ev, val_ev, _ = split_events(events)
    samples, val = build_training_set(train_ev), raw_samples(val_ev)
    failures, runs = [], 0
    for variant in ("baseline_mm", "independent_mm"):
        for seed in TREND_SEEDS:
            model, _ = train(samples, None, ModelConfig(variant=variant, hidden_dim=8, seed=seed),
                             TrainConfig(epochs=2, seed=seed))
            mp, bk = evaluate(model, val, "most_probable"), evaluate(model, val, "best_of_k")
            runs += 1
            for col, v in bk.maes().items():
                if v > mp.maes()[col] + 1e-12:
                    failures.append(f"{variant}/{seed}/{col}")
    report("trend: best-of-K dominates most-probable", not failures,
           f"{runs} multimodal runs x 5 columns, violations: {failures or 'none'}")


@pytest.mark.slow
def test_trend_feature_ablation(report):
    events = synthesize_events(SynthConfig(counts=scaled_counts(300), seed=2))
    spec = AblationSpec(masks=("FGHSO",) + SINGLE_GROUP_LABELS, model_config=ModelConfig(hidden_dim=8),
                        train_config=TrainConfig(epochs=5), seeds=TREND_SEEDS)
    res = ablate(spec, events)
    by_seed = defaultdict(dict)
    for r in res.per_seed:
        by_seed[r["seed"]][r["label"]] = r["overall_mae_s"]
    wins = sum(all(d["FGHSO"] <= d[lbl] for lbl in SINGLE_GROUP_LABELS) for d in by_seed.values())
    avg = {r["label"]: round(r["overall_mae_s"], 3) for r in res.rows}
    report("trend: all features beat every single group", wins >= 4, f"{wins}/5 seeds, mean overall MAE {avg}")


def test_transfer_pipeline(report):
    events = synthesize_events(SynthConfig(counts=scaled_counts(24), seed=14))
    train_ev, val_ev, _ = split_events(events)
    wins, labels = synthesize_ori_labels(train_ev, seed=0)
    cfg = ModelConfig(variant=INDEPENDENT, hidden_dim=6, seed=0)
    ori, _ = pretrain_ori([window_at(ev, e) for ev, e in wins], labels, cfg, TrainConfig(epochs=1))
    model = transfer(ori, cfg, seed=1)
    exact = all(np.array_equal(model.params[k], ori.params[k]) for k in ori.trunk_names())
    n_trunk = len(ori.trunk_names())
    model, hist = train(build_training_set(train_ev), raw_samples(val_ev), cfg, TrainConfig(epochs=1), model=model)
    rep = evaluate(model, raw_samples(val_ev))
    finite = all(np.isfinite(v) for v in rep.maes().values()) and np.isfinite(hist[0]["train_loss"])
    report("transfer pipeline", exact and finite,
           f"{n_trunk} trunk arrays copied bit-exactly, fine-tuned val overall MAE {rep.overall_mae_s:.3f} s")


def test_decision_properties(report):
    r = np.random.default_rng(21)
    bad = 0
    for _ in range(10_000):
        tot, ttc, eps = r.uniform(0, 10), r.uniform(0.01, 12), r.uniform(0, 2)
        d = decide(tot, ttc, eps)
        bad += d.hand_over != (tot + eps < ttc)
        bad += abs(d.margin_s - (ttc - (tot + eps))) > 1e-12
        step = r.uniform(0, 3)
        if d.hand_over:
            bad += not decide(tot, ttc + step, eps).hand_over
        else:
            bad += decide(tot + step, ttc, eps).hand_over or decide(tot, ttc, eps + step).hand_over
    boundary = decide(2.5, 3.0, 0.5).verdict == SAFE_STOP and decide(2.0, 3.0, 0.5).verdict == HAND_OVER
    report("decision properties", bad == 0 and boundary,
           f"10000 random triples, {bad} violations, boundary tot+eps=ttc -> SafeStop: {boundary}")


def test_streaming(report):
    r = np.random.default_rng(8)
    model = init_model(ModelConfig(variant=BASELINE, hidden_dim=4, seed=3))
    stream = r.uniform(size=(400, 41))
    bad = 0
    for _ in range(100):
        n, stride = int(r.integers(60, 400)), int(r.integers(1, 120))
        out = stream_predict(stream[:n], model, stride)
        bad += len(out) != (n - 60) // stride + 1
    dumps = [
        "\n".join(json.dumps(w.to_record()) for w in stream_predict(stream, model, 7)).encode()
        for _ in range(2)
    ]
    same = dumps[0] == dumps[1]
    report("streaming count law and determinism", bad == 0 and same,
           f"100 (length, stride) pairs, {bad} count mismatches, repeated runs byte-identical: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
