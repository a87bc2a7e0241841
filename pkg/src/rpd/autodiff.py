"""Reverse-mode automatic differentiation over float64 numpy arrays.

A small tape: each op returns a new node holding its value and a closure
that routes the incoming gradient to its parents. Only the operations the
training objectives need are implemented (dense layers, tanh, exp/log,
elementwise min/max/clip, reductions). Everything is float64.
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def _as_f64(x) -> Array:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Graph node wrapping a float64 ndarray.

    Leaf parameters are created with requires_grad=True and keep a
    persistent gradient slot of identical shape; interior nodes allocate
    their slot lazily during backward.
    """

    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, name: str = ""):
        self.value = _as_f64(value)
        self.requires_grad = requires_grad
        self.grad: Array | None = np.zeros_like(self.value) if requires_grad else None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def item(self) -> float:
        return float(self.value)

    def backward(self) -> None:
        backward(self)

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor(shape={self.value.shape}{tag}, grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: Array) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += _unbroadcast(g, t.value.shape)


def _node(value: Array, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(value)
    if any(p.requires_grad or p._parents for p in parents):
        out._parents = parents
        out._backward = backward_fn
    return out


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value + b.value

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _node(out_val, (a, b), bwd)


def neg(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accumulate(a, -g)

    return _node(-a.value, (a,), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value * b.value

    def bwd(g):
        _accumulate(a, g * b.value)
        _accumulate(b, g * a.value)

    return _node(out_val, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value / b.value

    def bwd(g):
        _accumulate(a, g / b.value)
        _accumulate(b, -g * a.value / (b.value * b.value))

    return _node(out_val, (a, b), bwd)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value @ b.value

    def bwd(g):
        _accumulate(a, g @ b.value.T)
        _accumulate(b, a.value.T @ g)

    return _node(out_val, (a, b), bwd)


def tanh(a) -> Tensor:
    a = _wrap(a)
    out_val = np.tanh(a.value)

    def bwd(g):
        _accumulate(a, g * (1.0 - out_val * out_val))

    return _node(out_val, (a,), bwd)


def exp(a) -> Tensor:
    a = _wrap(a)
    out_val = np.exp(a.value)

    def bwd(g):
        _accumulate(a, g * out_val)

    return _node(out_val, (a,), bwd)


def log(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accumulate(a, g / a.value)

    return _node(np.log(a.value), (a,), bwd)


def square(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accumulate(a, g * 2.0 * a.value)

    return _node(a.value * a.value, (a,), bwd)


def absolute(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accumulate(a, g * np.sign(a.value))

    return _node(np.abs(a.value), (a,), bwd)


def minimum(a, b) -> Tensor:
    """Elementwise min; gradient follows the smaller input (a on ties)."""
    a, b = _wrap(a), _wrap(b)
    take_a = a.value <= b.value

    def bwd(g):
        _accumulate(a, g * take_a)
        _accumulate(b, g * ~take_a)

    return _node(np.where(take_a, a.value, b.value), (a, b), bwd)


def maximum(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    take_a = a.value >= b.value

    def bwd(g):
        _accumulate(a, g * take_a)
        _accumulate(b, g * ~take_a)

    return _node(np.where(take_a, a.value, b.value), (a, b), bwd)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient is zero in the saturated regions."""
    a = _wrap(a)
    inside = (a.value > lo) & (a.value < hi)

    def bwd(g):
        _accumulate(a, g * inside)

    return _node(np.clip(a.value, lo, hi), (a,), bwd)


def sum_along(a, axis: int | None = None) -> Tensor:
    a = _wrap(a)
    out_val = a.value.sum(axis=axis)

    def bwd(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.value.shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.value.shape))

    return _node(out_val, (a,), bwd)


def mean_all(a) -> Tensor:
    a = _wrap(a)
    n = a.value.size

    def bwd(g):
        _accumulate(a, np.broadcast_to(g / n, a.value.shape))

    return _node(a.value.mean(), (a,), bwd)


def broadcast_rows(a, rows: int) -> Tensor:
    """Tile a 1-D tensor into (rows, n); gradient sums back over rows."""
    a = _wrap(a)
    out_val = np.broadcast_to(a.value, (rows,) + a.value.shape).copy()

    def bwd(g):
        _accumulate(a, g.sum(axis=0))

    return _node(out_val, (a,), bwd)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Populate gradient slots of every node reachable from `loss`.

    Repeated calls accumulate; callers zero parameter grads between steps.
    """
    if loss.value.ndim != 0:
        raise ValueError("backward() expects a scalar loss node")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    if loss.grad is None:
        loss.grad = np.zeros_like(loss.value)
    loss.grad += 1.0
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
