"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

Every forward operation records its parents and a backward closure on a
tape; calling ``backward()`` on a scalar loss walks the tape in reverse
topological order and accumulates gradients into every tensor that
requires them. This is deliberately minimal: only the operations needed
by the two entity-typing models exist, all arithmetic is float64, and
nothing here is thread-aware (the training loop owns the graph).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError, StateError


class Tensor:
    """A dense array plus optional gradient and tape bookkeeping.

    Tensors produced by forward ops are treated as immutable; mutating
    ``data`` in place after a graph has been built invalidates gradients.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _node(data, parents, backward_fn):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        return out

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise StateError(f"backward() requires a scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise StateError("backward() called on a tensor with no graph attached")

        order = []
        seen = set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        grads = {id(self): np.ones_like(self.data)}
        for t in reversed(order):
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t._backward_fn is not None:
                for parent, pg in t._backward_fn(g):
                    if not parent.requires_grad:
                        continue
                    if id(parent) in grads:
                        grads[id(parent)] += pg
                    else:
                        grads[id(parent)] = pg
            elif t.requires_grad and t._parents == ():
                # leaf parameter or input marked requires_grad
                t._accumulate(g)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return add(self, mul_scalar(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), mul_scalar(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return mul_scalar(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (undo numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise and linear algebra -----------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data
    return Tensor._node(
        data,
        (a, b),
        lambda g: ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape))),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data
    return Tensor._node(
        data,
        (a, b),
        lambda g: (
            (a, _unbroadcast(g * b.data, a.data.shape)),
            (b, _unbroadcast(g * a.data, b.data.shape)),
        ),
    )


def mul_scalar(a: Tensor, s: float) -> Tensor:
    return Tensor._node(a.data * s, (a,), lambda g: ((a, g * s),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul shapes do not conform: {a.data.shape} @ {b.data.shape}"
        )
    data = a.data @ b.data
    return Tensor._node(
        data,
        (a, b),
        lambda g: ((a, g @ b.data.T), (b, a.data.T @ g)),
    )


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0
    return Tensor._node(x.data * keep, (x,), lambda g: ((x, g * keep),))


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor._node(s, (x,), lambda g: ((x, g * s * (1.0 - s)),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return Tensor._node(t, (x,), lambda g: ((x, g * (1.0 - t * t)),))


def softmax_lastdim(x: Tensor) -> Tensor:
    """Numerically stable softmax along the last axis."""
    if np.isnan(x.data).any():
        raise NumericError("softmax input contains NaN")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        return ((x, s * (g - dot)),)

    return Tensor._node(s, (x,), backward)


def log(x: Tensor) -> Tensor:
    return Tensor._node(np.log(x.data), (x,), lambda g: ((x, g / x.data),))


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient is zero outside the open interval."""
    data = np.clip(x.data, lo, hi)
    inside = (x.data > lo) & (x.data < hi)
    return Tensor._node(data, (x,), lambda g: ((x, g * inside),))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(zip(tensors, pieces))

    return Tensor._node(data, tensors, backward)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        pieces = np.split(g, len(tensors), axis=axis)
        return tuple((t, np.squeeze(p, axis=axis)) for t, p in zip(tensors, pieces))

    return Tensor._node(data, tensors, backward)


def index(x: Tensor, key) -> Tensor:
    data = x.data[key]

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return ((x, full),)

    return Tensor._node(data, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape
    return Tensor._node(
        x.data.reshape(shape), (x,), lambda g: ((x, g.reshape(old)),)
    )


def tsum(x: Tensor) -> Tensor:
    return Tensor._node(
        np.asarray(x.data.sum()), (x,), lambda g: ((x, np.broadcast_to(g, x.data.shape).copy()),)
    )


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    return Tensor._node(
        np.asarray(x.data.mean()),
        (x,),
        lambda g: ((x, np.broadcast_to(g / n, x.data.shape).copy()),),
    )
