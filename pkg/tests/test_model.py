import numpy as np
import pytest

from oracle import finite_difference, ref_loss, ref_outputs, rel_error
from takeover.features import FeatureMask
from takeover.model import (
    BASELINE,
    BASELINE_MM,
    INDEPENDENT,
    INDEPENDENT_MM,
    ORI,
    VARIANTS,
    Adam,
    CheckpointError,
    ModelConfig,
    NumericError,
    TrainConfig,
    forward,
    init_model,
    load_checkpoint,
    loss_and_grad,
    loss_value,
    lstm_cell_step,
    predict_ori,
    save_checkpoint,
)
from takeover.model.checkpoint import MAGIC


def tiny(variant, seed=0, D=4, H=3, T=5, K=3):
    return ModelConfig(variant=variant, input_dim=D, hidden_dim=H, num_modes=K, window_frames=T, seed=seed)


def batch(cfg, n=3, seed=0):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, cfg.window_frames, cfg.input_dim))
    Y = r.uniform(0.1, 2.0, size=(n, 3))
    return X, Y


def perturbed(model, seed=0, scale=0.5):
    # random non-zero biases so every parameter path is exercised
    r = np.random.default_rng(seed)
    for k, v in model.params.items():
        v += r.normal(scale=scale, size=v.shape)
    return model


@pytest.mark.parametrize("variant", VARIANTS)
def test_forward_matches_reference(variant):
    cfg = tiny(variant)
    m = perturbed(init_model(cfg))
    X, _ = batch(cfg)
    ref = ref_outputs(m.params, cfg.n_cells, cfg.multimodal, "tot", X)
    pred = forward(m, X)
    if cfg.multimodal:
        assert np.allclose(pred.modes, ref["modes"], atol=1e-12)
        assert np.allclose(pred.logits, ref["logits"], atol=1e-12)
        assert np.allclose(pred.probs.sum(axis=1), 1.0)
    else:
        assert np.allclose(pred.times, ref["times"], atol=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("seed", [0, 1])
def test_gradients_match_finite_differences(variant, seed):
    cfg = tiny(variant, seed=seed)
    m = perturbed(init_model(cfg), seed=seed)
    X, Y = batch(cfg, seed=seed)
    _, g = loss_and_grad(m, X, Y)
    fd = finite_difference(lambda p: ref_loss(p, cfg.n_cells, cfg.multimodal, "tot", X, Y), m.params)
    for name in m.params:
        assert rel_error(g[name], fd[name]) < 1e-4, name


def test_ori_gradients():
    cfg = tiny(INDEPENDENT)
    m = perturbed(init_model(cfg, task=ORI))
    X, _ = batch(cfg)
    y = np.random.default_rng(0).uniform(size=3)
    _, g = loss_and_grad(m, X, y)
    fd = finite_difference(lambda p: ref_loss(p, 3, False, "ori", X, y), m.params)
    assert max(rel_error(g[k], fd[k]) for k in g) < 1e-4
    assert predict_ori(m, X).shape == (3,)


def test_loss_value_matches_reference():
    for v in VARIANTS:
        cfg = tiny(v)
        m = perturbed(init_model(cfg))
        X, Y = batch(cfg)
        assert loss_value(m, X, Y) == pytest.approx(ref_loss(m.params, cfg.n_cells, cfg.multimodal, "tot", X, Y))


def test_float32_close_to_float64():
    cfg = tiny(INDEPENDENT_MM)
    m = perturbed(init_model(cfg))
    X, Y = batch(cfg)
    l64, g64 = loss_and_grad(m, X, Y)
    m32 = m.copy()
    m32.params = {k: v.astype(np.float32) for k, v in m.params.items()}
    l32, g32 = loss_and_grad(m32, X, Y)
    assert all(g.dtype == np.float32 for g in g32.values())
    assert l32 == pytest.approx(l64, rel=1e-4)


def test_cell_step_example():
    H = 2
    p = {"Wx": np.zeros((3, 4 * H)), "Wh": np.zeros((H, 4 * H)), "b": np.zeros(4 * H)}
    h, c = lstm_cell_step(np.ones(3), np.zeros(H), np.zeros(H), p)
    # all gates 0.5, g = 0 -> state stays zero
    assert np.all(h == 0) and np.all(c == 0)
    p["b"][3 * H :] = 10.0
    h, c = lstm_cell_step(np.ones(3), np.zeros(H), np.zeros(H), p)
    assert c == pytest.approx([0.5, 0.5], abs=1e-8)
    assert h == pytest.approx(0.5 * np.tanh(0.5), abs=1e-8)
    with pytest.raises(NumericError):
        lstm_cell_step(np.array([np.nan, 0, 0]), np.zeros(H), np.zeros(H), p)


def test_shapes_and_heads():
    cfg = ModelConfig(variant=INDEPENDENT, input_dim=8, hidden_dim=5, window_frames=60)
    m = init_model(cfg)
    assert m.params["out.W"].shape == (5, 1)  # one head shared by the three cells
    assert init_model(ModelConfig(variant=BASELINE, input_dim=8, hidden_dim=5)).params["out.W"].shape == (5, 3)
    mm = init_model(ModelConfig(variant=BASELINE_MM, input_dim=8, hidden_dim=5, num_modes=4))
    assert mm.params["mode.W"].shape == (5, 12) and mm.params["prob.W"].shape == (5, 4)
    assert m.params["lstm0.b"][5:10] == pytest.approx(1.0)
    X = np.zeros((2, 60, 8))
    assert forward(m, X).times.shape == (2, 3)
    assert forward(mm, X).modes.shape == (2, 4, 3)
    assert np.all(forward(m, X).times >= 0)


def test_bad_inputs():
    m = init_model(tiny(BASELINE))
    with pytest.raises(ValueError, match="shape"):
        forward(m, np.zeros((1, 6, 4)))
    X = np.zeros((1, 5, 4))
    X[0, 2, 1] = np.inf
    with pytest.raises(NumericError):
        forward(m, X)
    with pytest.raises(ValueError):
        ModelConfig(variant="transformer")


def test_variant_aliases():
    assert ModelConfig(variant="ID LSTMs").variant == INDEPENDENT
    assert ModelConfig(variant="baseline-mm").variant == BASELINE_MM


def test_adam_matches_hand_computation():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam(lr=0.1)
    g = np.array([0.5, -1.0])
    opt.step(p, {"w": g})
    # first bias-corrected step moves each weight by lr * sign(g) (up to eps)
    assert p["w"] == pytest.approx([0.9, -1.9], abs=1e-6)
    opt.step(p, {"w": g})
    assert p["w"] == pytest.approx([0.8, -1.8], abs=1e-6)
    with pytest.raises(ValueError):
        opt.step(p, {"w": np.zeros(3)})


def test_adam_minimises_quadratic():
    p = {"x": np.array([3.0, -4.0])}
    opt = Adam(lr=0.05)
    for _ in range(2000):
        opt.step(p, {"x": 2 * p["x"]})
    assert np.abs(p["x"]).max() < 1e-2


@pytest.mark.parametrize("variant", VARIANTS)
def test_checkpoint_roundtrip(tmp_path, variant):
    cfg = tiny(variant)
    m = perturbed(init_model(cfg, mask=FeatureMask.from_label("G")))
    path = tmp_path / "m.ckpt"
    save_checkpoint(m, path)
    back = load_checkpoint(path)
    assert back.config == m.config and back.mask == m.mask and back.task == m.task
    assert list(back.params) == list(m.params)
    for k in m.params:
        assert np.array_equal(back.params[k], m.params[k])
    assert path.read_bytes().startswith(MAGIC)


def test_checkpoint_errors(tmp_path):
    m = init_model(tiny(BASELINE))
    path = tmp_path / "m.ckpt"
    save_checkpoint(m, path)
    data = path.read_bytes()
    (tmp_path / "magic").write_bytes(b"XXXXXXXX" + data[8:])
    (tmp_path / "version").write_bytes(data[:8] + b"\x09\x00" + data[10:])
    (tmp_path / "short").write_bytes(data[:-8])
    (tmp_path / "long").write_bytes(data + b"\x00")
    for name, msg in (("magic", "magic"), ("version", "version 9"), ("short", "truncated"), ("long", "trailing")):
        with pytest.raises(CheckpointError, match=msg):
            load_checkpoint(tmp_path / name)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(precision="float16")
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_identical_cells_identical_states():
    cfg = tiny(INDEPENDENT)
    m = perturbed(init_model(cfg))
    for name in ("Wx", "Wh", "b"):
        m.params[f"lstm1.{name}"] = m.params[f"lstm0.{name}"].copy()
        m.params[f"lstm2.{name}"] = m.params[f"lstm0.{name}"].copy()
    X, _ = batch(cfg)
    t = forward(m, X).times
    # one shared head on identical states -> identical component predictions
    assert np.array_equal(t[:, 0], t[:, 1]) and np.array_equal(t[:, 1], t[:, 2])


def test_min_of_k_permutation_invariant(rng):
    from takeover.model import Prediction, loss_min_of_k

    for _ in range(20):
        modes = rng.uniform(0, 3, size=(4, 3, 3))
        logits = rng.normal(size=(4, 3))
        t = rng.uniform(0, 3, size=(4, 3))
        perm = rng.permutation(3)
        a = loss_min_of_k(Prediction(modes=modes, logits=logits), t)
        b = loss_min_of_k(Prediction(modes=modes[:, perm], logits=logits[:, perm]), t)
        assert a == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_outputs_non_negative_for_extreme_weights(variant):
    cfg = tiny(variant)
    m = perturbed(init_model(cfg), scale=20.0)
    X, _ = batch(cfg)
    p = forward(m, X)
    out = p.modes if cfg.multimodal else p.times
    assert np.all(out >= 0) and np.all(np.isfinite(out))
    if cfg.multimodal:
        assert np.allclose(p.probs.sum(axis=1), 1.0) and np.all(p.probs >= 0)
