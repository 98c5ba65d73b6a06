"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps an ndarray and remembers the operation that produced it.
``backward`` walks the recorded graph once in reverse topological order and
accumulates gradients into every node, then harvests them for the named
parameter leaves. Only the operations needed by the dense blocks in this
package are implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np


class AutodiffError(ValueError):
    """Raised for structurally invalid graphs (non-scalar loss, bad shapes)."""


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast axes so the gradient matches the operand shape."""
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
    """Node in the recorded computation graph.

    ``value`` is always a float64 ndarray. ``_parents`` and ``_vjps`` encode
    one backward rule per parent: each vjp maps the output gradient to that
    parent's gradient contribution.
    """

    __slots__ = ("value", "grad", "_parents", "_vjps")

    def __init__(self, value, parents: tuple = (), vjps: tuple = ()):
        self.value = _as_array(value)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._vjps = vjps

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    # ---- elementwise arithmetic -------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(
            self.value + other.value,
            parents=(self, other),
            vjps=(
                lambda g: _unbroadcast(g, self.shape),
                lambda g: _unbroadcast(g, other.shape),
            ),
        )
        return out

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.value, parents=(self,), vjps=(lambda g: -g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(
            self.value * other.value,
            parents=(self, other),
            vjps=(
                lambda g: _unbroadcast(g * other.value, self.shape),
                lambda g: _unbroadcast(g * self.value, other.shape),
            ),
        )
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        out = Tensor(
            self.value / other.value,
            parents=(self, other),
            vjps=(
                lambda g: _unbroadcast(g / other.value, self.shape),
                lambda g: _unbroadcast(-g * self.value / other.value**2, other.shape),
            ),
        )
        return out

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        if not isinstance(exponent, (int, float)):
            raise AutodiffError("only constant exponents are supported")
        out = Tensor(
            self.value**exponent,
            parents=(self,),
            vjps=(lambda g: g * exponent * self.value ** (exponent - 1),),
        )
        return out

    # ---- linear algebra ---------------------------------------------------------

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.ndim != 2 or other.ndim != 2:
            raise AutodiffError("matmul expects 2-D operands")
        out = Tensor(
            self.value @ other.value,
            parents=(self, other),
            vjps=(
                lambda g: g @ other.value.T,
                lambda g: self.value.T @ g,
            ),
        )
        return out

    @property
    def T(self) -> "Tensor":
        if self.ndim != 2:
            raise AutodiffError("transpose expects a 2-D tensor")
        return Tensor(self.value.T, parents=(self,), vjps=(lambda g: g.T,))

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        old = self.shape
        return Tensor(
            self.value.reshape(shape),
            parents=(self,),
            vjps=(lambda g: g.reshape(old),),
        )

    # ---- nonlinearities ---------------------------------------------------------

    def tanh(self) -> "Tensor":
        y = np.tanh(self.value)
        return Tensor(y, parents=(self,), vjps=(lambda g: g * (1.0 - y**2),))

    def sigmoid(self) -> "Tensor":
        y = 1.0 / (1.0 + np.exp(-self.value))
        return Tensor(y, parents=(self,), vjps=(lambda g: g * y * (1.0 - y),))

    def relu(self) -> "Tensor":
        y = np.maximum(self.value, 0.0)
        return Tensor(y, parents=(self,), vjps=(lambda g: g * (self.value > 0),))

    def exp(self) -> "Tensor":
        y = np.exp(self.value)
        return Tensor(y, parents=(self,), vjps=(lambda g: g * y,))

    def log(self) -> "Tensor":
        return Tensor(
            np.log(self.value), parents=(self,), vjps=(lambda g: g / self.value,)
        )

    def sqrt(self) -> "Tensor":
        y = np.sqrt(self.value)
        return Tensor(y, parents=(self,), vjps=(lambda g: g * 0.5 / y,))

    # ---- reductions -------------------------------------------------------------

    def sum(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        out_value = self.value.sum(axis=axis, keepdims=keepdims)
        shape = self.shape

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g, shape).astype(np.float64)
            gg = g if keepdims else np.expand_dims(g, axis)
            return np.broadcast_to(gg, shape).astype(np.float64)

        return Tensor(out_value, parents=(self,), vjps=(vjp,))

    def mean(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        n = self.value.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Tensor(shape={self.shape})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def constant(value) -> Tensor:
    """Leaf with no parents; gradients stop here."""
    return Tensor(value)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def make_vjp(index: int):
        return lambda g: np.split(g, splits, axis=axis)[index]

    return Tensor(
        np.concatenate([p.value for p in parts], axis=axis),
        parents=tuple(parts),
        vjps=tuple(make_vjp(i) for i in range(len(parts))),
    )


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax; the max shift is treated as a constant."""
    shift = np.max(t.value, axis=axis, keepdims=True)
    e = (t - constant(shift)).exp()
    return e / e.sum(axis=axis if axis >= 0 else t.ndim + axis, keepdims=True)


@dataclass
class GradientReport:
    """Analytic gradients of a scalar loss for a set of named parameters."""

    loss: float
    grads: dict[str, np.ndarray]

    def __post_init__(self):
        if not math.isfinite(self.loss):
            raise AutodiffError(f"loss is not finite: {self.loss}")


def backward(loss: Tensor, params: Mapping[str, Tensor]) -> GradientReport:
    """Propagate gradients from a recorded scalar loss to the given leaves.

    Parameters mapped to leaves that do not appear in the graph receive an
    all-zero gradient of the matching shape.
    """
    if loss.value.size != 1:
        raise AutodiffError(f"loss must be scalar, got shape {loss.value.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    for node in topo:
        node.grad = None
    loss.grad = np.ones_like(loss.value)

    for node in reversed(topo):
        if node.grad is None:
            continue
        for parent, vjp in zip(node._parents, node._vjps):
            contribution = vjp(node.grad)
            if parent.grad is None:
                parent.grad = np.array(contribution, dtype=np.float64, copy=True)
            else:
                parent.grad = parent.grad + contribution

    grads = {}
    for name, leaf in params.items():
        g = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        if g.shape != leaf.value.shape:
            raise AutodiffError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name} of shape {leaf.value.shape}"
            )
        grads[name] = np.asarray(g, dtype=np.float64)
    return GradientReport(loss=float(loss.value.reshape(())), grads=grads)


Vjp = Callable[[np.ndarray], np.ndarray]
