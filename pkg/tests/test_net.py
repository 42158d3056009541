import numpy as np
import pytest

from margnet.graphgen import GenSpec, generate
from margnet.net import (AdamHyper, CheckpointError, NetConfig, NetParams,
                         adam_step, backward, bce_loss, check_compatible,
                         effective_types, extract_embedding, forward, init,
                         init_adam, load_params, make_rng, predict_marginals,
                         save_params, smooth_losses, train_stream)

CFG = NetConfig(n_nodes=3, embedding_dim=3, trunk_hidden=(4,),
                head_hidden=(2,), type_cap=2, seed=5)
TYPES = np.array([1, 2, 2])


def small_params():
    return init(CFG, TYPES)


# ---------------------------------------------------------------------------
# Configuration and initialisation
# ---------------------------------------------------------------------------

def test_config_rejects_zero_width():
    with pytest.raises(ValueError):
        NetConfig(n_nodes=3, trunk_hidden=(0,)).check()
    with pytest.raises(ValueError):
        NetConfig(n_nodes=3, head_hidden=(64, 0)).check()
    with pytest.raises(ValueError):
        NetConfig(n_nodes=3, embedding_dim=0).check()


def test_config_rejects_bad_dropout():
    with pytest.raises(ValueError):
        NetConfig(n_nodes=3, dropout_rate=1.0).check()
    with pytest.raises(ValueError):
        NetConfig(n_nodes=3, dropout_rate=-0.1).check()


def test_config_round_trip():
    cfg = NetConfig(n_nodes=5, embedding_dim=8, trunk_hidden=(16, 8),
                    head_hidden=(), type_cap=2, dropout_rate=0.25,
                    adam=AdamHyper(3e-4, 0.8, 0.99, 1e-9), batch_size=32, seed=7)
    assert NetConfig.from_dict(cfg.to_dict()) == cfg


def test_init_shapes_and_bounds():
    p = small_params()
    assert p.arrays["trunk0.W"].shape == (6, 4)
    assert p.arrays["embed.W"].shape == (4, 3)
    assert p.arrays["head1.0.W"].shape == (3, 2)
    assert p.arrays["head2.0.W"].shape == (3, 2)
    assert p.arrays["out.W"].shape == (3, 2)
    for name, arr in p.arrays.items():
        if name.endswith(".b"):
            assert np.all(arr == 0.0)
        else:
            fan_in = arr.shape[0] if not name.startswith("out.") else arr.shape[1]
            assert np.all(np.abs(arr) <= 1.0 / np.sqrt(fan_in))


def test_init_deterministic():
    a, b = small_params(), small_params()
    for name in a.arrays:
        assert np.array_equal(a.arrays[name], b.arrays[name])


def test_init_validates_types():
    with pytest.raises(ValueError):
        init(CFG, np.array([1, 2]))
    with pytest.raises(ValueError):
        init(CFG, np.array([1, 2, 3]))   # above type_cap


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def reference_forward(p: NetParams, x: np.ndarray) -> np.ndarray:
    """Independent re-implementation with explicit per-sample loops."""
    cfg = p.config
    a = p.arrays
    out = np.empty((x.shape[0], cfg.n_nodes))
    for j in range(x.shape[0]):
        h = x[j]
        for l in range(len(cfg.trunk_hidden)):
            h = np.maximum(a[f"trunk{l}.W"].T @ h + a[f"trunk{l}.b"], 0.0)
        e = np.maximum(a["embed.W"].T @ h + a["embed.b"], 0.0)
        for i in range(cfg.n_nodes):
            t = int(p.node_types[i])
            g = e
            for l in range(len(cfg.head_hidden)):
                g = np.maximum(a[f"head{t}.{l}.W"].T @ g + a[f"head{t}.{l}.b"], 0.0)
            z = float(a["out.W"][i] @ g + a["out.b"][i])
            out[j, i] = 1.0 / (1.0 + np.exp(-z))
    return out


def test_forward_matches_reference():
    p = small_params()
    x = make_rng(1).random((7, 6))
    got = forward(p, x, mode="eval").probs
    assert np.allclose(got, reference_forward(p, x), rtol=1e-12, atol=1e-14)


def test_forward_single_vector_promoted():
    p = small_params()
    x = make_rng(2).random(6)
    assert forward(p, x).probs.shape == (1, 3)


def test_forward_rejects_bad_width():
    with pytest.raises(ValueError):
        forward(small_params(), np.zeros(5))


def test_eval_forward_is_pure():
    p = small_params()
    x = make_rng(3).random((4, 6))
    a = forward(p, x, mode="eval").probs
    b = forward(p, x, mode="eval").probs
    assert np.array_equal(a, b)


def test_probs_in_open_interval():
    p = small_params()
    x = make_rng(4).random((16, 6))
    probs = forward(p, x).probs
    assert np.all(probs > 0.0) and np.all(probs < 1.0)


def test_zero_params_give_half():
    p = small_params()
    for name in p.arrays:
        p.arrays[name][:] = 0.0
    probs = forward(p, np.zeros(6)).probs
    assert np.all(probs == 0.5)


def test_dropout_needs_rng():
    cfg = NetConfig(n_nodes=3, embedding_dim=3, trunk_hidden=(4,),
                    head_hidden=(2,), type_cap=2, dropout_rate=0.5, seed=5)
    p = init(cfg, TYPES)
    x = np.zeros(6)
    with pytest.raises(ValueError):
        forward(p, x, mode="train")
    forward(p, x, mode="train", rng=make_rng(0))   # fine
    forward(p, x, mode="eval")                     # dropout off in eval


def test_dropout_inverted_scaling_preserves_mean():
    cfg = NetConfig(n_nodes=4, embedding_dim=16, trunk_hidden=(16,),
                    head_hidden=(64,), dropout_rate=0.4, type_cap=1, seed=2)
    p = init(cfg, np.ones(4, dtype=np.int64))
    x = make_rng(5).random((1, 8))
    evals = np.stack([
        forward(p, x, mode="train", rng=make_rng(k)).head_final[1][0]
        for k in range(4000)
    ])
    ref = forward(p, x, mode="eval").head_final[1][0]
    big = ref > 0.05
    assert np.allclose(evals.mean(axis=0)[big], ref[big], rtol=0.1)


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------

def test_bce_hand_value():
    probs = np.array([0.7, 0.4])
    target = np.array([1.0, 0.0])
    want = -(np.log(0.7) + np.log(0.6)) / 2
    assert bce_loss(probs, target) == pytest.approx(want, rel=1e-12)


def test_bce_clamps():
    val = bce_loss(np.array([0.0]), np.array([1.0]))
    assert val == pytest.approx(-np.log(1e-7), rel=1e-12)


def grad_check(params, x, target, rel_tol=1e-4, per_array=6, h=1e-6,
               dropout_seed=None):
    def loss_fn():
        rng = make_rng(dropout_seed) if dropout_seed is not None else None
        mode = "train" if dropout_seed is not None else "eval"
        return forward(params, x, mode=mode, rng=rng)

    trace = loss_fn()
    grads = backward(params, trace, target)
    rng = np.random.default_rng(0)
    worst = 0.0
    for name, arr in params.arrays.items():
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        idx = rng.choice(flat.size, size=min(per_array, flat.size), replace=False)
        for k in idx:
            orig = flat[k]
            flat[k] = orig + h
            lp = bce_loss(loss_fn().probs, target)
            flat[k] = orig - h
            lm = bce_loss(loss_fn().probs, target)
            flat[k] = orig
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(g[k]), 1e-8)
            worst = max(worst, abs(fd - g[k]) / denom)
    return worst


def test_gradients_match_finite_differences():
    cfg = NetConfig(n_nodes=6, embedding_dim=5, trunk_hidden=(8,),
                    head_hidden=(4,), type_cap=3, seed=11)
    types = np.array([1, 1, 2, 2, 3, 3])
    p = init(cfg, types)
    rng = make_rng(12)
    x = rng.random((5, 12))
    target = (rng.random((5, 6)) < 0.5).astype(np.float64)
    assert grad_check(p, x, target) < 1e-4


def test_gradients_no_trunk_no_head_layers():
    cfg = NetConfig(n_nodes=4, embedding_dim=6, trunk_hidden=(),
                    head_hidden=(), type_cap=2, seed=13)
    p = init(cfg, np.array([1, 1, 2, 2]))
    rng = make_rng(14)
    x = rng.random((3, 8))
    target = (rng.random((3, 4)) < 0.5).astype(np.float64)
    assert grad_check(p, x, target) < 1e-4


def test_gradients_with_dropout_mask_held_fixed():
    cfg = NetConfig(n_nodes=4, embedding_dim=6, trunk_hidden=(5,),
                    head_hidden=(4,), type_cap=2, dropout_rate=0.3, seed=15)
    p = init(cfg, np.array([1, 2, 1, 2]))
    rng = make_rng(16)
    x = rng.random((4, 8))
    target = (rng.random((4, 4)) < 0.5).astype(np.float64)
    assert grad_check(p, x, target, dropout_seed=99) < 1e-4


def test_weight_sharing_perturbation():
    p = small_params()
    x = make_rng(17).random((6, 6))
    base = forward(p, x).probs
    p2 = p.copy()
    p2.arrays["head2.0.W"] += 0.05
    moved = forward(p2, x).probs
    type2 = TYPES == 2
    assert np.array_equal(base[:, ~type2], moved[:, ~type2])
    assert np.all(base[:, type2] != moved[:, type2])


def test_output_row_is_node_specific():
    p = small_params()
    x = make_rng(18).random((6, 6))
    base = forward(p, x).probs
    p2 = p.copy()
    p2.arrays["out.W"][1] += 0.05
    moved = forward(p2, x).probs
    assert np.array_equal(base[:, [0, 2]], moved[:, [0, 2]])
    assert np.all(base[:, 1] != moved[:, 1])


# ---------------------------------------------------------------------------
# Optimiser and training
# ---------------------------------------------------------------------------

def test_adam_first_step_is_signed_lr():
    p = small_params()
    state = init_adam(p)
    hyper = AdamHyper(learning_rate=1e-3)
    before = {k: v.copy() for k, v in p.arrays.items()}
    grads = {k: make_rng(19).standard_normal(v.shape) for k, v in p.arrays.items()}
    adam_step(p, grads, state, hyper)
    for name in p.arrays:
        g = grads[name]
        delta = p.arrays[name] - before[name]
        big = np.abs(g) > 1e-3
        assert np.allclose(delta[big], -hyper.learning_rate * np.sign(g[big]),
                           rtol=1e-4)


def test_adam_rejects_nonfinite_without_mutating():
    p = small_params()
    state = init_adam(p)
    before = {k: v.copy() for k, v in p.arrays.items()}
    grads = {k: np.zeros_like(v) for k, v in p.arrays.items()}
    grads["embed.W"][0, 0] = np.inf
    with pytest.raises(FloatingPointError):
        adam_step(p, grads, state, AdamHyper())
    assert state.t == 0
    for name in p.arrays:
        assert np.array_equal(p.arrays[name], before[name])


def test_replayed_batch_loss_monotone():
    cfg = NetConfig(n_nodes=4, embedding_dim=8, trunk_hidden=(8,),
                    head_hidden=(6,), type_cap=2, seed=23,
                    adam=AdamHyper(learning_rate=1e-4))
    p = init(cfg, np.array([1, 1, 2, 2]))
    state = init_adam(p)
    rng = make_rng(24)
    x = rng.random((16, 8))
    target = (rng.random((16, 4)) < 0.5).astype(np.float64)
    losses = []
    for _ in range(50):
        trace = forward(p, x, mode="eval")
        losses.append(bce_loss(trace.probs, target))
        adam_step(p, backward(p, trace, target), state, cfg.adam)
    diffs = np.diff(losses)
    assert np.all(diffs <= 1e-12)


def test_train_stream_deterministic():
    net = generate(GenSpec(seed=31, layers=2, nodes_per_layer=3))
    cfg = NetConfig(n_nodes=6, embedding_dim=8, trunk_hidden=(8,),
                    head_hidden=(4,), batch_size=16, seed=32)
    a = train_stream(net, cfg, 12)
    b = train_stream(net, cfg, 12)
    assert np.array_equal(a.losses, b.losses)
    for name in a.params.arrays:
        assert np.array_equal(a.params.arrays[name], b.params.arrays[name])
    assert a.params.step == 12
    assert np.array_equal(a.params.node_types, effective_types(net, cfg.type_cap))


def test_train_stream_reduces_loss():
    net = generate(GenSpec(seed=33, layers=2, nodes_per_layer=3))
    cfg = NetConfig(n_nodes=6, embedding_dim=16, trunk_hidden=(32,),
                    head_hidden=(16,), batch_size=64, seed=34)
    res = train_stream(net, cfg, 150)
    assert res.smoothed[-1] < res.smoothed[10]


def test_smooth_losses_ema():
    s = smooth_losses(np.array([1.0, 0.0, 0.0]), alpha=0.1)
    assert s[0] == 1.0
    assert s[1] == pytest.approx(0.9)
    assert s[2] == pytest.approx(0.81)


# ---------------------------------------------------------------------------
# Embeddings and checkpoints
# ---------------------------------------------------------------------------

def test_extract_embedding_dim_and_repeatability():
    p = small_params()
    enc = np.zeros(6)
    e1 = extract_embedding(p, enc)
    e2 = extract_embedding(p, enc)
    assert e1.shape == (3,)
    assert np.array_equal(e1, e2)


def test_embeddings_differ_across_evidence():
    net = generate(GenSpec(seed=35, layers=2, nodes_per_layer=3))
    cfg = NetConfig(n_nodes=6, embedding_dim=8, trunk_hidden=(8,),
                    head_hidden=(4,), batch_size=32, seed=36)
    p = train_stream(net, cfg, 60).params
    from margnet.encoding import encode
    a = extract_embedding(p, encode({0: True}, 6))
    b = extract_embedding(p, encode({0: False}, 6))
    assert not np.array_equal(a, b)


def test_checkpoint_round_trip(tmp_path):
    p = small_params()
    p.step = 17
    path = tmp_path / "m.ckpt"
    save_params(p, path)
    q = load_params(path)
    assert q.config == p.config
    assert q.step == 17
    assert np.array_equal(q.node_types, p.node_types)
    x = make_rng(37).random((5, 6))
    assert np.array_equal(forward(p, x).probs, forward(q, x).probs)


def test_checkpoint_truncation_detected(tmp_path):
    p = small_params()
    path = tmp_path / "m.ckpt"
    save_params(p, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(CheckpointError):
        load_params(path)


def test_checkpoint_trailing_bytes_detected(tmp_path):
    p = small_params()
    path = tmp_path / "m.ckpt"
    save_params(p, path)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(CheckpointError):
        load_params(path)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\0" * 64)
    with pytest.raises(CheckpointError):
        load_params(path)


def test_checkpoint_version_mismatch(tmp_path):
    p = small_params()
    path = tmp_path / "m.ckpt"
    save_params(p, path)
    blob = bytearray(path.read_bytes())
    blob[8] = 99   # version field
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError):
        load_params(path)


def test_check_compatible(tmp_path):
    net = generate(GenSpec(seed=38, layers=2, nodes_per_layer=3))
    cfg = NetConfig(n_nodes=6, embedding_dim=4, trunk_hidden=(4,),
                    head_hidden=(), type_cap=2, seed=39)
    p = init(cfg, effective_types(net, 2))
    check_compatible(p, net)
    other = generate(GenSpec(seed=38, layers=3, nodes_per_layer=3))
    with pytest.raises(CheckpointError):
        check_compatible(p, other)


def test_predict_marginals_shape():
    p = small_params()
    x = make_rng(40).random((9, 6))
    assert predict_marginals(p, x).shape == (9, 3)
