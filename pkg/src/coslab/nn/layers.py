"""Layer zoo: dense maps, layer norm, multi-head attention, GRU cell, embeddings.

Layers register their parameters in a :class:`~coslab.nn.optim.ParamStore`
under a dotted prefix so checkpoints and optimizer state stay addressable by
name. Forward passes are ordinary functions of tensors; nothing here holds
activation state.
"""

from __future__ import annotations

import math

import numpy as np

from .optim import ParamStore
from .tensor import ShapeError, Tensor, concat, matmul, softmax, take

__all__ = [
    "glorot_uniform",
    "Dense",
    "Conv1x1",
    "LayerNorm",
    "MultiHeadAttention",
    "TransformerEncoderLayer",
    "PositionalEmbedding",
    "GRUCell",
]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, scale: float = 1.0):
    a = scale * math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


class Dense:
    """Affine map over the trailing axis, with an optional activation."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator, activation: str | None = None,
                 w_scale: float = 1.0):
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.w = store.create(f"{name}.w", glorot_uniform(rng, in_dim, out_dim, w_scale))
        self.b = store.create(f"{name}.b", np.zeros(out_dim))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(
                f"layer {self.name}: expected trailing dim {self.in_dim}, got {x.shape}")
        y = matmul(x, self.w) + self.b
        if self.activation == "relu":
            return y.relu()
        if self.activation == "sigmoid":
            return y.sigmoid()
        if self.activation == "tanh":
            return y.tanh()
        return y


class Conv1x1(Dense):
    """1x1 convolution over a (..., positions, channels) volume.

    Identical math to a dense map on the channel axis shared across positions.
    """


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int, eps: float = 1e-5):
        self.name = name
        self.dim = dim
        self.eps = eps
        self.gamma = store.create(f"{name}.gamma", np.ones(dim))
        self.beta = store.create(f"{name}.beta", np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        xn = xc * (var + self.eps) ** -0.5
        return xn * self.gamma + self.beta


class MultiHeadAttention:
    """Scaled dot-product self-attention over (batch, tokens, d_model)."""

    def __init__(self, store: ParamStore, name: str, d_model: int, heads: int,
                 rng: np.random.Generator):
        if d_model % heads != 0:
            raise ShapeError(f"layer {name}: d_model {d_model} not divisible by {heads} heads")
        self.name = name
        self.d_model = d_model
        self.heads = heads
        self.d_head = d_model // heads
        self.wq = Dense(store, f"{name}.q", d_model, d_model, rng)
        self.wk = Dense(store, f"{name}.k", d_model, d_model, rng)
        self.wv = Dense(store, f"{name}.v", d_model, d_model, rng)
        self.wo = Dense(store, f"{name}.o", d_model, d_model, rng)

    def _split(self, x: Tensor, b: int, n: int) -> Tensor:
        return x.reshape(b, n, self.heads, self.d_head).transpose((0, 2, 1, 3))

    def __call__(self, x: Tensor) -> Tensor:
        if len(x.shape) != 3 or x.shape[-1] != self.d_model:
            raise ShapeError(
                f"layer {self.name}: expected (batch, tokens, {self.d_model}), got {x.shape}")
        b, n, _ = x.shape
        q = self._split(self.wq(x), b, n)
        k = self._split(self.wk(x), b, n)
        v = self._split(self.wv(x), b, n)
        scores = matmul(q, k.transpose((0, 1, 3, 2))) * (1.0 / math.sqrt(self.d_head))
        attn = softmax(scores, axis=-1)
        mixed = matmul(attn, v).transpose((0, 2, 1, 3)).reshape(b, n, self.d_model)
        return self.wo(mixed)


class TransformerEncoderLayer:
    """Post-norm encoder block: attention and feed-forward, each with a residual."""

    def __init__(self, store: ParamStore, name: str, d_model: int, heads: int,
                 ffn_hidden: int, rng: np.random.Generator):
        self.attn = MultiHeadAttention(store, f"{name}.attn", d_model, heads, rng)
        self.ln1 = LayerNorm(store, f"{name}.ln1", d_model)
        self.ff1 = Dense(store, f"{name}.ff1", d_model, ffn_hidden, rng, activation="relu")
        self.ff2 = Dense(store, f"{name}.ff2", ffn_hidden, d_model, rng)
        self.ln2 = LayerNorm(store, f"{name}.ln2", d_model)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.ln1(x + self.attn(x))
        return self.ln2(h + self.ff2(self.ff1(h)))


class PositionalEmbedding:
    """Learned per-token position table added to the input sequence."""

    def __init__(self, store: ParamStore, name: str, n_max: int, d_model: int,
                 rng: np.random.Generator, init_scale: float = 0.02):
        self.name = name
        self.n_max = n_max
        self.table = store.create(f"{name}.table",
                                  init_scale * rng.standard_normal((n_max, d_model)))

    def __call__(self, x: Tensor, positions=None) -> Tensor:
        n = x.shape[-2]
        if positions is None:
            positions = np.arange(n)
        positions = np.asarray(positions, dtype=np.intp)
        if positions.max(initial=0) >= self.n_max:
            raise ShapeError(
                f"layer {self.name}: position {positions.max()} >= table size {self.n_max}")
        return x + take(self.table, positions, axis=0)


class GRUCell:
    """Single gated recurrent cell; zero input/hidden/biases map to a zero next hidden."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, hidden: int,
                 rng: np.random.Generator):
        self.name = name
        self.in_dim = in_dim
        self.hidden = hidden
        self.wx = store.create(f"{name}.wx", glorot_uniform(rng, in_dim, 3 * hidden))
        self.wh = store.create(f"{name}.wh", glorot_uniform(rng, hidden, 3 * hidden))
        self.bx = store.create(f"{name}.bx", np.zeros(3 * hidden))
        self.bh = store.create(f"{name}.bh", np.zeros(3 * hidden))
        h = hidden
        self._ir = np.arange(0, h)
        self._iz = np.arange(h, 2 * h)
        self._in = np.arange(2 * h, 3 * h)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim or h.shape[-1] != self.hidden:
            raise ShapeError(
                f"layer {self.name}: got input {x.shape}, hidden {h.shape}, "
                f"expected trailing dims {self.in_dim}/{self.hidden}")
        gx = matmul(x, self.wx) + self.bx
        gh = matmul(h, self.wh) + self.bh
        r = (take(gx, self._ir, axis=-1) + take(gh, self._ir, axis=-1)).sigmoid()
        z = (take(gx, self._iz, axis=-1) + take(gh, self._iz, axis=-1)).sigmoid()
        n = (take(gx, self._in, axis=-1) + r * take(gh, self._in, axis=-1)).tanh()
        return (1.0 - z) * n + z * h


def mlp_stack(store: ParamStore, name: str, dims: list[int], rng: np.random.Generator,
              hidden_activation: str = "relu", out_activation: str | None = None):
    """Chain of Dense layers; ``dims`` is [in, hidden..., out]."""
    layers = []
    for i in range(len(dims) - 1):
        act = hidden_activation if i < len(dims) - 2 else out_activation
        layers.append(Dense(store, f"{name}.{i}", dims[i], dims[i + 1], rng, activation=act))

    def forward(x: Tensor) -> Tensor:
        for layer in layers:
            x = layer(x)
        return x

    forward.layers = layers
    return forward
