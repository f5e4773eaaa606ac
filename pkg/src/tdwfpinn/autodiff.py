"""A small reverse-mode differentiation engine over numpy arrays.

:class:`Var` wraps an array and records the operations applied to it. Calling
:meth:`Var.backward` on a scalar result accumulates gradients into every
leaf that was created with ``requires_grad=True``.

Only the operations needed by the PINN losses are provided. Plain numpy
arrays and Python scalars mix freely with :class:`Var` operands and are
treated as constants.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["Var", "affine", "as_var", "tanh", "value_of"]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum *grad* down to *shape*, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """An array node in a computation graph."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")
    # make numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: tuple[Var, ...] = (),
        backward: Callable[[np.ndarray], tuple] | None = None,
    ) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    def __repr__(self) -> str:
        return f"Var(shape={self.value.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def __len__(self) -> int:
        return len(self.value)

    # {{{ graph traversal

    def backward(self, seed=None) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for all leaves."""
        if seed is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            seed = np.ones_like(self.value)

        order: list[Var] = []
        seen: set[int] = set()
        stack: list[tuple[Var, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                prev = grads.get(id(p))
                grads[id(p)] = pg if prev is None else prev + pg

    # }}}

    # {{{ arithmetic

    def __add__(self, other):
        o = as_var(other)
        a, b = self.shape, o.shape
        return Var(
            self.value + o.value, parents=(self, o),
            backward=lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)),
        )

    __radd__ = __add__

    def __sub__(self, other):
        o = as_var(other)
        a, b = self.shape, o.shape
        return Var(
            self.value - o.value, parents=(self, o),
            backward=lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)),
        )

    def __rsub__(self, other):
        return as_var(other) - self

    def __mul__(self, other):
        o = as_var(other)
        x, y = self.value, o.value
        return Var(
            x * y, parents=(self, o),
            backward=lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = as_var(other)
        x, y = self.value, o.value
        out = x / y
        return Var(
            out, parents=(self, o),
            backward=lambda g: (
                _unbroadcast(g / y, x.shape),
                _unbroadcast(-g * out / y, y.shape),
            ),
        )

    def __rtruediv__(self, other):
        return as_var(other) / self

    def __neg__(self):
        return Var(-self.value, parents=(self,), backward=lambda g: (-g,))

    def __pow__(self, p):
        if isinstance(p, Var):
            raise TypeError("only constant exponents are supported")
        x = self.value
        p = float(p)
        if p == 2.0:
            return Var(x * x, parents=(self,), backward=lambda g: (2.0 * g * x,))
        return Var(x**p, parents=(self,), backward=lambda g: (g * p * x ** (p - 1.0),))

    def __matmul__(self, other):
        o = as_var(other)
        x, y = self.value, o.value
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("matmul supports 2-d operands only")
        return Var(x @ y, parents=(self, o), backward=lambda g: (g @ y.T, x.T @ g))

    def __rmatmul__(self, other):
        return as_var(other) @ self

    # }}}

    # {{{ reductions and indexing

    def sum(self, axis=None):
        shape = self.shape
        out = self.value.sum(axis=axis)

        def bw(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Var(out, parents=(self,), backward=bw)

    def mean(self, axis=None):
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return Var(
            self.value.reshape(*shape), parents=(self,),
            backward=lambda g: (g.reshape(old),),
        )

    def __getitem__(self, idx):
        shape = self.shape

        def bw(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return (out,)

        # basic slicing (incl. None) gives a view; scatter with add.at is only
        # needed for fancy indexing
        if _is_basic_index(idx):
            def bw(g):  # noqa: F811
                out = np.zeros(shape)
                out[idx] += g
                return (out,)

        return Var(self.value[idx], parents=(self,), backward=bw)

    # }}}


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(i is None or i is Ellipsis or isinstance(i, (int, slice)) for i in items)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def value_of(x) -> np.ndarray:
    """The numeric array underlying *x* (a :class:`Var` or array-like)."""
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def tanh(x):
    if not isinstance(x, Var):
        return np.tanh(x)
    y = np.tanh(x.value)

    def bw(g):
        d = y * y
        np.subtract(1.0, d, out=d)
        d *= g
        return (d,)

    return Var(y, parents=(x,), backward=bw)


def affine(a, w, b):
    """``a @ w + b`` for 2-d *a*, *w* and a row vector *b*, as one node."""
    if not any(isinstance(v, Var) for v in (a, w, b)):
        out = a @ w
        out += b
        return out

    a, w, b = as_var(a), as_var(w), as_var(b)
    av, wv = a.value, w.value
    out = av @ wv
    out += b.value

    def bw(g):
        return (
            g @ wv.T if a.requires_grad else None,
            av.T @ g if w.requires_grad else None,
            g.sum(axis=0, keepdims=True).reshape(b.shape) if b.requires_grad else None,
        )

    return Var(out, parents=(a, w, b), backward=bw)
