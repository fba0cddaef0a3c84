"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy array and records the operations applied to it.
Calling :meth:`Tensor.backward` on a scalar walks the recorded graph in
reverse topological order and accumulates gradients into every reachable
tensor that has ``requires_grad=True``.

Everything is float64 and single-threaded; two runs with the same seeds and
the same op order produce bit-identical results.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "tensor",
    "concat",
    "matmul",
    "take",
    "logsumexp",
    "softmax",
    "log_softmax",
    "categorical_sample",
    "categorical_logprob",
]

# Floor for guarded logarithms: keeps log() finite on zero inputs instead of
# propagating -inf (which would turn into NaN under 0 * -inf downstream).
_LOG_FLOOR = 1e-300

_GRAD_ENABLED = True


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible, with op/layer context."""


class no_grad:
    """Context manager that disables graph recording (forward-only mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- graph ----------------------------------------------------------------

    def backward(self) -> None:
        """Backpropagate from a scalar tensor through the recorded graph."""
        if self.size != 1:
            raise ShapeError(f"backward() requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return _binary(self, other, np.add,
                       lambda g, a, b: _unbroadcast(g, a.shape),
                       lambda g, a, b: _unbroadcast(g, b.shape))

    __radd__ = __add__

    def __sub__(self, other):
        return _binary(self, other, np.subtract,
                       lambda g, a, b: _unbroadcast(g, a.shape),
                       lambda g, a, b: _unbroadcast(-g, b.shape))

    def __rsub__(self, other):
        return _as_tensor(other) - self

    def __mul__(self, other):
        return _binary(self, other, np.multiply,
                       lambda g, a, b: _unbroadcast(g * b, a.shape),
                       lambda g, a, b: _unbroadcast(g * a, b.shape))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _binary(self, other, np.divide,
                       lambda g, a, b: _unbroadcast(g / b, a.shape),
                       lambda g, a, b: _unbroadcast(-g * a / (b * b), b.shape))

    def __rtruediv__(self, other):
        return _as_tensor(other) / self

    def __neg__(self):
        return self * -1.0

    def __pow__(self, p: float):
        out = _node(np.power(self.data, p), (self,))
        if out._parents:
            def back(g, a=self.data):
                self._backward_into(g * p * np.power(a, p - 1))
            out._backward = back
        return out

    def _backward_into(self, g):
        if self.requires_grad or self._parents:
            self._accumulate(g)

    # -- pointwise ------------------------------------------------------------

    def exp(self):
        out_data = np.exp(self.data)
        out = _node(out_data, (self,))
        if out._parents:
            out._backward = lambda g, o=out_data: self._backward_into(g * o)
        return out

    def log(self):
        safe = np.maximum(self.data, _LOG_FLOOR)
        out = _node(np.log(safe), (self,))
        if out._parents:
            out._backward = lambda g, s=safe: self._backward_into(g / s)
        return out

    def sigmoid(self):
        s = 0.5 * (1.0 + np.tanh(0.5 * self.data))  # overflow-safe logistic
        out = _node(s, (self,))
        if out._parents:
            out._backward = lambda g, s=s: self._backward_into(g * s * (1.0 - s))
        return out

    def tanh(self):
        t = np.tanh(self.data)
        out = _node(t, (self,))
        if out._parents:
            out._backward = lambda g, t=t: self._backward_into(g * (1.0 - t * t))
        return out

    def relu(self):
        mask = self.data > 0.0
        out = _node(np.where(mask, self.data, 0.0), (self,))
        if out._parents:
            out._backward = lambda g, m=mask: self._backward_into(g * m)
        return out

    def square(self):
        return self * self

    def clip(self, lo: float, hi: float):
        clipped = np.clip(self.data, lo, hi)
        out = _node(clipped, (self,))
        if out._parents:
            mask = (self.data > lo) & (self.data < hi)
            out._backward = lambda g, m=mask: self._backward_into(g * m)
        return out

    def minimum(self, other):
        other = _as_tensor(other)
        mask = self.data <= other.data
        out = _node(np.where(mask, self.data, other.data), (self, other))
        if out._parents:
            def back(g, m=mask):
                self._backward_into(_unbroadcast(g * m, self.shape))
                other._backward_into(_unbroadcast(g * ~m, other.shape))
            out._backward = back
        return out

    # -- reductions / shaping ---------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = _node(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out._parents:
            def back(g):
                gg = g
                if not keepdims and axis is not None:
                    gg = np.expand_dims(g, axis)
                self._backward_into(np.broadcast_to(gg, self.shape).copy())
            out._backward = back
        return out

    def mean(self, axis=None, keepdims: bool = False):
        n = self.size if axis is None else (
            np.prod([self.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _node(self.data.reshape(shape), (self,))
        if out._parents:
            out._backward = lambda g: self._backward_into(g.reshape(self.shape))
        return out

    def transpose(self, axes: Sequence[int]):
        axes = tuple(axes)
        out = _node(self.data.transpose(axes), (self,))
        if out._parents:
            inv = tuple(np.argsort(axes))
            out._backward = lambda g: self._backward_into(g.transpose(inv))
        return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _node(data: np.ndarray, parents: Iterable[Tensor]) -> Tensor:
    """Create an output tensor, recording parents only when grads are needed."""
    out = Tensor(data)
    if _GRAD_ENABLED:
        ps = tuple(p for p in parents if p.requires_grad or p._parents)
        if ps:
            out._parents = ps
    return out


def _binary(a: Tensor, b, fwd, back_a, back_b) -> Tensor:
    b = _as_tensor(b)
    out = _node(fwd(a.data, b.data), (a, b))
    if out._parents:
        def back(g, ad=a.data, bd=b.data):
            a._backward_into(back_a(g, ad, bd))
            b._backward_into(back_b(g, ad, bd))
        out._backward = back
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with optional leading batch dims on either operand.

    Trailing two axes follow normal matmul rules; a 2-D operand broadcasts
    against the other's batch dims (shared-weight case), with its gradient
    summed back over the batch.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul expects >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = _node(np.matmul(a.data, b.data), (a, b))
    if out._parents:
        def back(g, ad=a.data, bd=b.data):
            ga = np.matmul(g, bd.swapaxes(-1, -2))
            gb = np.matmul(ad.swapaxes(-1, -2), g)
            a._backward_into(_unbroadcast(ga, a.shape))
            b._backward_into(_unbroadcast(gb, b.shape))
        out._backward = back
    return out


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    if out._parents:
        sizes = [p.shape[axis] for p in parts]
        splits = np.cumsum(sizes)[:-1]
        def back(g):
            for p, piece in zip(parts, np.split(g, splits, axis=axis)):
                p._backward_into(piece)
        out._backward = back
    return out


def take(x: Tensor, indices, axis: int = 0) -> Tensor:
    """Gather slices along ``axis`` by a 1-D integer index array (repeats allowed)."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError(f"take expects a 1-D index array, got shape {idx.shape}")
    out = _node(np.take(x.data, idx, axis=axis), (x,))
    if out._parents:
        def back(g):
            gx = np.zeros_like(x.data)
            np.add.at(np.moveaxis(gx, axis, 0), idx, np.moveaxis(g, axis, 0))
            x._backward_into(gx)
        out._backward = back
    return out


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    m = np.max(x.data, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x.data - m)
    s = e.sum(axis=axis, keepdims=True)
    val = m + np.log(np.maximum(s, _LOG_FLOOR))
    out_data = val if keepdims else np.squeeze(val, axis=axis)
    out = _node(out_data, (x,))
    if out._parents:
        w = e / np.maximum(s, _LOG_FLOOR)
        def back(g, w=w):
            gg = g if keepdims else np.expand_dims(g, axis)
            x._backward_into(gg * w)
        out._backward = back
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax; rows sum to 1 and stay finite for |logits| up to ~1e3."""
    m = np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    p = e / e.sum(axis=axis, keepdims=True)
    out = _node(p, (x,))
    if out._parents:
        def back(g, p=p):
            dot = (g * p).sum(axis=axis, keepdims=True)
            x._backward_into(p * (g - dot))
        out._backward = back
    return out


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return x - logsumexp(x, axis=axis, keepdims=True)


# -- categorical utilities ----------------------------------------------------

def _check_simplex(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise ShapeError(f"categorical expects a 1-D probability vector, got {probs.shape}")
    if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must be >= 0 and sum to 1 within 1e-9")
    return probs


def categorical_sample(probs, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector."""
    probs = _check_simplex(probs)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def categorical_logprob(probs, index: int) -> float:
    probs = _check_simplex(probs)
    return float(np.log(max(probs[int(index)], _LOG_FLOOR)))
