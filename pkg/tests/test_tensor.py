"""Autodiff core: op gradients, stability guards, optimizer, categorical utils."""

import numpy as np
import pytest
from conftest import gradcheck, randomize_store

from coslab.nn import (
    Dense,
    GRUCell,
    LayerNorm,
    MultiHeadAttention,
    ParamStore,
    PositionalEmbedding,
    ShapeError,
    Tensor,
    TransformerEncoderLayer,
    adamw_step,
    categorical_logprob,
    categorical_sample,
    concat,
    log_softmax,
    logsumexp,
    matmul,
    no_grad,
    softmax,
    take,
)


def test_sigmoid_grad_at_zero():
    x = Tensor(np.zeros(5), requires_grad=True)
    y = x.sigmoid().sum()
    y.backward()
    assert np.allclose(x.grad, 0.25)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        (x * 2.0).backward()


def test_disconnected_parameter_grad_zero():
    store = ParamStore()
    a = store.create("a", np.ones(3))
    b = store.create("b", np.ones(3))
    (a * 2.0).sum().backward()
    grads = store.grads()
    assert np.all(grads["b"] == 0.0)
    assert np.allclose(grads["a"], 2.0)


def test_softmax_rows_sum_and_stability():
    rng = np.random.default_rng(0)
    x = Tensor(rng.uniform(-1e3, 1e3, size=(6, 9)))
    p = softmax(x).numpy()
    assert np.all(np.isfinite(p))
    assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    lp = log_softmax(x).numpy()
    assert np.all(np.isfinite(lp))


def test_log_guarded_at_zero():
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    y = x.log()
    assert np.all(np.isfinite(y.numpy()))


def test_no_grad_blocks_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * 3.0).sum()
    assert y._parents == ()


def _op_cases(rng):
    a = lambda *s: rng.standard_normal(s)
    return {
        "add": (lambda x, y: (x + y).sum(), [a(3, 4), a(3, 4)]),
        "add_broadcast": (lambda x, y: (x + y).sum(), [a(3, 4), a(4)]),
        "sub": (lambda x, y: (x - y).mean(), [a(5), a(5)]),
        "mul": (lambda x, y: (x * y).sum(), [a(3, 4), a(3, 4)]),
        "div": (lambda x, y: (x / y).sum(), [a(4), a(4) + 3.0]),
        "pow": (lambda x: ((x + 4.0) ** -0.5).sum(), [a(6)]),
        "exp": (lambda x: x.exp().sum(), [a(5)]),
        "log": (lambda x: (x + 5.0).log().sum(), [a(5)]),
        "tanh": (lambda x: x.tanh().sum(), [a(7)]),
        "sigmoid": (lambda x: x.sigmoid().sum(), [a(7)]),
        "relu": (lambda x: x.relu().sum(), [a(7) + 0.3]),
        "clip": (lambda x: x.clip(-0.5, 0.5).sum(), [a(9) * 2.0]),
        "minimum": (lambda x, y: x.minimum(y).sum(), [a(8), a(8)]),
        "matmul": (lambda x, y: matmul(x, y).sum(), [a(3, 4), a(4, 2)]),
        "matmul_batched": (lambda x, y: matmul(x, y).sum(), [a(5, 3, 4), a(4, 2)]),
        "sum_axis": (lambda x: x.sum(axis=0).mean(), [a(4, 3)]),
        "mean_keepdims": (lambda x: (x - x.mean(axis=-1, keepdims=True)).square().sum(),
                          [a(4, 3)]),
        "reshape_transpose": (lambda x: x.reshape(2, 6).transpose((1, 0)).sum(),
                              [a(3, 4)]),
        "concat": (lambda x, y: concat([x, y], axis=-1).square().sum(),
                   [a(3, 2), a(3, 5)]),
        "take": (lambda x: take(x, [2, 0, 2], axis=0).sum(), [a(4, 3)]),
        "softmax": (lambda x: (softmax(x) * softmax(x)).sum(), [a(4, 5)]),
        "log_softmax": (lambda x: log_softmax(x).sum(), [a(4, 5)]),
        "logsumexp": (lambda x: logsumexp(x, axis=-1).sum(), [a(4, 5)]),
    }


@pytest.mark.parametrize("name", sorted(_op_cases(np.random.default_rng(0))))
def test_op_gradients_match_finite_differences(name):
    rng = np.random.default_rng(hash(name) % 2**32)
    worst = 0.0
    for trial in range(20):
        fn, arrays = _op_cases(rng)[name]
        store = ParamStore()
        tensors = [store.create(f"x{i}", arr) for i, arr in enumerate(arrays)]
        worst = max(worst, gradcheck(lambda: fn(*tensors), store, rng, n_coords=4))
    assert worst < 1e-4


def _layer_loss(kind, store, rng):
    """Build one random layer instance and a loss closure over fixed inputs."""
    if kind == "dense":
        layer = Dense(store, "d", 5, 3, rng, activation="relu")
        x = Tensor(rng.standard_normal((4, 5)))
        return lambda: layer(x).sum()
    if kind == "conv1x1":
        layer = Dense(store, "c", 6, 4, rng, activation="relu")
        x = Tensor(rng.standard_normal((2, 7, 6)))  # positions share the kernel
        return lambda: layer(x).square().sum()
    if kind == "layernorm":
        layer = LayerNorm(store, "ln", 6)
        x = Tensor(rng.standard_normal((3, 6)))
        return lambda: layer(x).square().sum()
    if kind == "mha":
        layer = MultiHeadAttention(store, "mha", 8, 2, rng)
        x = Tensor(rng.standard_normal((2, 3, 8)))
        return lambda: layer(x).sum()
    if kind == "encoder":
        layer = TransformerEncoderLayer(store, "enc", 8, 2, 8, rng)
        x = Tensor(rng.standard_normal((2, 3, 8)))
        return lambda: layer(x).sum()
    if kind == "posembed":
        layer = PositionalEmbedding(store, "pe", 6, 4, rng)
        x = Tensor(rng.standard_normal((2, 3, 4)))
        return lambda: layer(x).square().sum()
    if kind == "gru":
        layer = GRUCell(store, "gru", 5, 4, rng)
        x = Tensor(rng.standard_normal((3, 5)))
        h = Tensor(rng.standard_normal((3, 4)))
        return lambda: layer(x, h).sum()
    raise AssertionError(kind)


LAYER_KINDS = ("dense", "conv1x1", "layernorm", "mha", "encoder", "posembed", "gru")


@pytest.mark.parametrize("kind", LAYER_KINDS)
def test_layer_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(abs(hash(kind)) % 2**32)
    for _ in range(20):
        store = ParamStore()
        loss_fn = _layer_loss(kind, store, rng)
        randomize_store(store, rng)
        gradcheck(loss_fn, store, rng, n_coords=3)


def test_dense_zero_weights_zero_output():
    store = ParamStore()
    rng = np.random.default_rng(0)
    d = Dense(store, "d", 3, 2, rng)
    d.w.data[...] = 0.0
    out = d(Tensor(np.ones((4, 3))))
    assert np.all(out.numpy() == 0.0)


def test_softmax_symmetry():
    out = softmax(Tensor(np.zeros((1, 2)))).numpy()
    assert np.allclose(out, 0.5)


def test_mha_identity_single_token():
    # Hand-computed single-token attention: weights degenerate to 1.0, so the
    # output is the value projection of the input; with identity projections
    # it is the input itself.
    store = ParamStore()
    rng = np.random.default_rng(3)
    mha = MultiHeadAttention(store, "mha", 8, 2, rng)
    for name in ("q", "k", "v", "o"):
        layer = getattr(mha, f"w{name}")
        layer.w.data[...] = np.eye(8)
        layer.b.data[...] = 0.0
    x = rng.standard_normal((1, 1, 8))
    out = mha(Tensor(x)).numpy()
    assert np.allclose(out, x, atol=1e-12)


def test_gru_zero_fixed_point():
    store = ParamStore()
    rng = np.random.default_rng(5)
    gru = GRUCell(store, "g", 4, 4, rng)
    gru.bx.data[...] = 0.0
    gru.bh.data[...] = 0.0
    h = gru(Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 4))))
    assert np.all(h.numpy() == 0.0)


def test_shape_error_names_layer():
    store = ParamStore()
    d = Dense(store, "proj", 4, 2, np.random.default_rng(0))
    with pytest.raises(ShapeError, match="proj"):
        d(Tensor(np.ones((3, 5))))


def test_determinism_bitwise():
    def run():
        rng = np.random.default_rng(11)
        store = ParamStore()
        d = Dense(store, "d", 6, 6, rng, activation="relu")
        x = Tensor(rng.standard_normal((5, 6)))
        loss = (softmax(d(x)) * d(x)).sum()
        store.zero_grad()
        loss.backward()
        return loss.item(), {k: v.copy() for k, v in store.grads().items()}

    l1, g1 = run()
    l2, g2 = run()
    assert l1 == l2
    for k in g1:
        assert np.array_equal(g1[k], g2[k])


# -- AdamW ----------------------------------------------------------------------


def test_adamw_defaults_single_step_closed_form():
    # One step on scalar w=1 with g=1: m=0.1g is bias-corrected back to 1,
    # v likewise, so the update is lr * 1/(1+eps), plus decoupled decay.
    store = ParamStore()
    w = store.create("w", np.array(1.0))
    w.grad = np.array(1.0)
    lr, eps, wd = 5e-4, 1e-8, 0.01
    adamw_step(store, lr=lr, weight_decay=wd, eps=eps)
    expected = (1.0 - lr * wd * 1.0) - lr * (1.0 / (1.0 + eps))
    assert w.data == pytest.approx(expected, abs=1e-15)
    assert store.step == 1


def test_adamw_zero_grad_no_decay_is_noop():
    store = ParamStore()
    w = store.create("w", np.array([1.0, -2.0]))
    adamw_step(store, lr=1e-3, weight_decay=0.0)
    assert np.array_equal(w.data, np.array([1.0, -2.0]))


def test_adamw_moment_shapes_track_params():
    store = ParamStore()
    store.create("w", np.ones((3, 2)))
    assert store.m["w"].shape == (3, 2)
    assert store.v["w"].shape == (3, 2)


# -- categorical ------------------------------------------------------------------


def test_categorical_degenerate():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert categorical_sample([1.0, 0.0, 0.0], rng) == 0


def test_categorical_uniform_frequencies():
    rng = np.random.default_rng(1)
    n = 100_000
    counts = np.zeros(4)
    p = np.full(4, 0.25)
    for _ in range(n):
        counts[categorical_sample(p, rng)] += 1
    assert np.all(np.abs(counts / n - 0.25) < 0.01)


def test_categorical_logprob():
    assert categorical_logprob([0.5, 0.5], 1) == pytest.approx(np.log(0.5))


def test_categorical_rejects_bad_simplex():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        categorical_sample([0.5, 0.6], rng)
    with pytest.raises(ValueError):
        categorical_sample([-0.1, 1.1], rng)
