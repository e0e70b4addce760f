"""Reverse-mode automatic differentiation over float64 numpy arrays.

A ``Tensor`` wraps a value array plus a closure that scatters the output
gradient to its parents; ``backward()`` walks the graph in reverse topological
order.  The primitive set is exactly what the attention models need: add,
multiply, divide, matmul, transpose, reshape, concat, slicing, sum, mean,
softmax, layer norm, ReLU / LeakyReLU.  Broadcasting follows numpy rules and
gradients of broadcast operands are summed back to their original shape.

``set_debug(True)`` makes every forward and backward step assert finiteness,
which the test suite enables.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "set_debug",
    "parameter",
    "constant",
    "add",
    "mul",
    "div",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "sum_",
    "mean",
    "softmax",
    "layer_norm",
    "relu",
    "leaky_relu",
]

_DEBUG = False


def set_debug(flag: bool) -> None:
    global _DEBUG
    _DEBUG = bool(flag)


def _check(arr):
    if _DEBUG and not np.all(np.isfinite(arr)):
        raise FloatingPointError("non-finite values in autodiff graph")
    return arr


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, values, parents=(), backward_fn=None, requires_grad=False):
        self.values = _check(np.asarray(values, dtype=np.float64))
        self.grad = None
        self._parents = parents
        self._backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.values.shape

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += _check(g)

    def backward(self):
        if self.values.size != 1:
            raise ValueError("backward() starts from a scalar")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.values)
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        return float(self.values.reshape(()))

    # Operator sugar keeps model code readable.
    def __add__(self, other):
        return add(self, _lift(other))

    def __sub__(self, other):
        return add(self, mul(_lift(other), constant(-1.0)))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __getitem__(self, key):
        a = self

        def bwd(g):
            full = np.zeros_like(a.values)
            full[key] = g
            a._accumulate(full)

        return Tensor(self.values[key], (self,), bwd)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"


def parameter(values) -> Tensor:
    return Tensor(np.array(values, dtype=np.float64), requires_grad=True)


def constant(values) -> Tensor:
    return Tensor(values)


def _lift(x):
    return x if isinstance(x, Tensor) else constant(x)


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out_values = a.values + b.values

    def bwd(g):
        a._accumulate(_unbroadcast(g, a.values.shape))
        b._accumulate(_unbroadcast(g, b.values.shape))

    return Tensor(out_values, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_values = a.values * b.values

    def bwd(g):
        a._accumulate(_unbroadcast(g * b.values, a.values.shape))
        b._accumulate(_unbroadcast(g * a.values, b.values.shape))

    return Tensor(out_values, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    out_values = a.values / b.values

    def bwd(g):
        a._accumulate(_unbroadcast(g / b.values, a.values.shape))
        b._accumulate(_unbroadcast(-g * a.values / b.values**2, b.values.shape))

    return Tensor(out_values, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim < 2 or b.values.ndim < 2:
        raise ValueError("matmul operands need at least 2 dimensions")
    out_values = a.values @ b.values

    def bwd(g):
        a._accumulate(_unbroadcast(g @ np.swapaxes(b.values, -1, -2), a.values.shape))
        b._accumulate(_unbroadcast(np.swapaxes(a.values, -1, -2) @ g, b.values.shape))

    return Tensor(out_values, (a, b), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def bwd(g):
        a._accumulate(np.transpose(g, inverse))

    return Tensor(np.transpose(a.values, axes), (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.values.shape

    def bwd(g):
        a._accumulate(g.reshape(old))

    return Tensor(a.values.reshape(shape), (a,), bwd)


def concat(tensors, axis: int) -> Tensor:
    tensors = list(tensors)
    sizes = [t.values.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accumulate(piece)

    return Tensor(np.concatenate([t.values for t in tensors], axis=axis), tuple(tensors), bwd)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def bwd(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.values.shape).copy())
            return
        gg = g if keepdims else np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(gg, a.values.shape).copy())

    return Tensor(a.values.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def mean(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    count = a.values.shape[axis]

    def bwd(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(gg / count, a.values.shape).copy())

    return Tensor(a.values.mean(axis=axis, keepdims=keepdims), (a,), bwd)


def softmax(a: Tensor) -> Tensor:
    """Row softmax over the last axis."""
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_values = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        inner = (g * out_values).sum(axis=-1, keepdims=True)
        a._accumulate(out_values * (g - inner))

    return Tensor(out_values, (a,), bwd)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance (no affine part)."""
    mu = a.values.mean(axis=-1, keepdims=True)
    var = a.values.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    out_values = (a.values - mu) * inv_std

    def bwd(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * out_values).mean(axis=-1, keepdims=True)
        a._accumulate(inv_std * (g - gm - out_values * gy))

    return Tensor(out_values, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0

    def bwd(g):
        a._accumulate(g * mask)

    return Tensor(np.where(mask, a.values, 0.0), (a,), bwd)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    mask = a.values > 0

    def bwd(g):
        a._accumulate(g * np.where(mask, 1.0, slope))

    return Tensor(np.where(mask, a.values, slope * a.values), (a,), bwd)
