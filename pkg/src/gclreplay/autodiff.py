"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

The engine supports exactly what the models in this package need: dense and
constant-sparse matrix products, broadcasting arithmetic, row gather/scatter
for edge-level message passing, and a few nonlinearities. A forward pass
builds a fresh expression graph; calling :meth:`Tensor.backward` on a scalar
accumulates gradients into every reachable tensor's ``grad`` slot.

Everything is float64. Trainable leaves are created with
``requires_grad=True`` and keep their ``grad`` until the optimizer clears it.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Reduce ``grad`` back to ``shape`` after numpy broadcasting."""
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
    """A node in the expression graph wrapping a float64 ndarray."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        _parents: Sequence["Tensor"] = (),
        _backward_fn: Callable[[Array], None] | None = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = tuple(_parents)
        self._backward_fn = _backward_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            # copy: backward closures may hand the same buffer to two parents
            self.grad = np.array(g, dtype=np.float64)
            if self.grad.shape != self.value.shape:
                self.grad = np.broadcast_to(self.grad, self.value.shape).copy()
        else:
            self.grad += g

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable ``grad`` slot.

        ``self`` must be a scalar (the loss).
        """
        if self.value.size != 1:
            raise ValueError("backward() expects a scalar output")
        # Iterative post-order walk over tensors that require gradients.
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.value))
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value: Array, parents: Sequence[Tensor], backward) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, _parents=parents, _backward_fn=backward)
    return Tensor(value)


# -- arithmetic ----------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value + b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_val, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value - b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(out_val, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value * b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _make(out_val, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value / b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.value / (b.value * b.value), b.shape))

    return _make(out_val, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_val = a.value @ b.value

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)

    return _make(out_val, (a, b), backward)


def sparse_matmul(s: sp.spmatrix, b: Tensor) -> Tensor:
    """``s @ b`` for a constant scipy sparse matrix ``s``."""
    out_val = np.asarray(s @ b.value, dtype=np.float64)

    def backward(g: Array) -> None:
        if b.requires_grad:
            b._accumulate(np.asarray(s.T @ g))

    return _make(out_val, (b,), backward)


# -- reductions ----------------------------------------------------------


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out_val = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g: Array) -> None:
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg, a.shape).copy())

    return _make(out_val, (a,), backward)


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    n = a.value.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / n))


# -- elementwise nonlinearities -------------------------------------------


def texp(a: Tensor) -> Tensor:
    out_val = np.exp(a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * out_val)

    return _make(out_val, (a,), backward)


def tlog(a: Tensor) -> Tensor:
    out_val = np.log(a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g / a.value)

    return _make(out_val, (a,), backward)


def tsqrt(a: Tensor) -> Tensor:
    out_val = np.sqrt(a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * 0.5 / out_val)

    return _make(out_val, (a,), backward)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    pos = a.value > 0
    out_val = np.where(pos, a.value, slope * a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * np.where(pos, 1.0, slope))

    return _make(out_val, (a,), backward)


def elu(a: Tensor) -> Tensor:
    pos = a.value > 0
    expm1 = np.expm1(np.minimum(a.value, 0.0))
    out_val = np.where(pos, a.value, expm1)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * np.where(pos, 1.0, expm1 + 1.0))

    return _make(out_val, (a,), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient flows only through the strict interior."""
    out_val = np.clip(a.value, lo, hi)
    interior = (a.value > lo) & (a.value < hi)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * interior)

    return _make(out_val, (a,), backward)


# -- gather / scatter -----------------------------------------------------


def gather_rows(a: Tensor, idx: Array, adjoint: sp.spmatrix | None = None) -> Tensor:
    """``a[idx]`` along axis 0.

    ``adjoint`` is an optional precomputed (rows(a) x len(idx)) sparse matrix
    whose product with the upstream gradient performs the scatter-add; without
    it the backward pass falls back to ``np.add.at`` (fine for small index
    sets, slow for per-edge gathers).
    """
    out_val = a.value[idx]

    def backward(g: Array) -> None:
        if not a.requires_grad:
            return
        if adjoint is not None:
            a._accumulate(np.asarray(adjoint @ g))
        else:
            acc = np.zeros_like(a.value)
            np.add.at(acc, idx, g)
            a._accumulate(acc)

    return _make(out_val, (a,), backward)


def scatter_sum(a: Tensor, scatter: sp.spmatrix, idx: Array) -> Tensor:
    """Segment sum: row ``i`` of the result is the sum of ``a`` rows with
    ``idx == i``. ``scatter`` is the precomputed (n_out x rows(a)) indicator
    matrix; ``idx`` is kept for the backward gather."""
    out_val = np.asarray(scatter @ a.value)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g[idx])

    return _make(out_val, (a,), backward)


def take_columns(a: Tensor, cols: Array) -> Tensor:
    """``a[:, cols]`` for a 1-D integer column index."""
    out_val = a.value[:, cols]

    def backward(g: Array) -> None:
        if a.requires_grad:
            acc = np.zeros_like(a.value)
            np.add.at(acc.T, cols, g.T)
            a._accumulate(acc)

    return _make(out_val, (a,), backward)


def segment_max(values: Array, idx: Array, n: int) -> Array:
    """Per-segment max of a 1-D array (plain numpy, used detached)."""
    out = np.full(n, -np.inf)
    np.maximum.at(out, idx, values)
    return out
