"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every operation eagerly computes a numpy result and, while gradient
recording is enabled, remembers its parents together with a VJP closure.
``backward`` walks the recorded graph from a scalar root and accumulates
gradients for all ``requires_grad`` leaves.

The op vocabulary is deliberately small: add/sub/mul/div (with numpy
broadcasting), matmul, concat, basic slicing, row gather, segment sum,
sum/mean reductions, abs, log, exp, sqrt, square, sigmoid, softplus and
elementwise maximum.  Results are checked for NaN/Inf on creation; a
non-finite value raises instead of propagating silently.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy.special import expit

from ..errors import NumericsError, ShapeError

__all__ = [
    "Tensor",
    "backward",
    "no_grad",
    "concat",
    "maximum",
    "segment_sum",
    "take_rows",
]

# recording is per-thread so parallel no-grad rollouts cannot interfere
_tape_state = threading.local()


def _recording() -> bool:
    return getattr(_tape_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable gradient recording inside the block (inference-only paths)."""
    prev = _recording()
    _tape_state.enabled = False
    try:
        yield
    finally:
        _tape_state.enabled = prev


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericsError(f"non-finite values produced by '{op}'")


class Tensor:
    """Immutable float64 array plus autodiff metadata."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, "tensor")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _from_op(data: np.ndarray, parents: Sequence["Tensor"], vjp, op: str) -> "Tensor":
        _check_finite(data, op)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        tracked = _recording() and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._vjp = vjp if tracked else None
        return out

    # -- basic introspection ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError("item() requires a single-element tensor")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = _as_tensor(other)
        data = self.data + other.data

        def vjp(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        return Tensor._from_op(data, (self, other), vjp, "add")

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other) -> "Tensor":
        other = _as_tensor(other)
        data = self.data - other.data

        def vjp(g):
            return _unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)

        return Tensor._from_op(data, (self, other), vjp, "sub")

    def __rsub__(self, other) -> "Tensor":
        return _as_tensor(other).__sub__(self)

    def __mul__(self, other) -> "Tensor":
        other = _as_tensor(other)
        data = self.data * other.data
        a, b = self, other

        def vjp(g):
            return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

        return Tensor._from_op(data, (a, b), vjp, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = _as_tensor(other)
        with np.errstate(divide="ignore", invalid="ignore"):
            data = self.data / other.data
        a, b = self, other

        def vjp(g):
            ga = _unbroadcast(g / b.data, a.shape)
            gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
            return ga, gb

        return Tensor._from_op(data, (a, b), vjp, "div")

    def __rtruediv__(self, other) -> "Tensor":
        return _as_tensor(other).__truediv__(self)

    def __matmul__(self, other) -> "Tensor":
        other = _as_tensor(other)
        if self.ndim != 2 or other.ndim != 2:
            raise ShapeError("matmul expects 2-d operands")
        if self.shape[1] != other.shape[0]:
            raise ShapeError(f"matmul mismatch: {self.shape} @ {other.shape}")
        data = self.data @ other.data
        a, b = self, other

        def vjp(g):
            return g @ b.data.T, a.data.T @ g

        return Tensor._from_op(data, (a, b), vjp, "matmul")

    def __getitem__(self, key) -> "Tensor":
        data = self.data[key]
        if np.isscalar(data) or data.ndim == 0:
            data = np.asarray(data)
        src_shape = self.shape

        def vjp(g):
            full = np.zeros(src_shape)
            full[key] = g
            return (full,)

        return Tensor._from_op(data, (self,), vjp, "slice")

    # -- reductions --------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)
        src_shape = self.shape

        def vjp(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, src_shape).copy(),)

        return Tensor._from_op(np.asarray(data), (self,), vjp, "sum")

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise nonlinearities ----------------------------------------------

    def abs(self) -> "Tensor":
        sign = np.sign(self.data)
        return Tensor._from_op(np.abs(self.data), (self,), lambda g: (g * sign,), "abs")

    def log(self) -> "Tensor":
        x = self.data
        if np.any(x <= 0):
            raise NumericsError("log of non-positive value")
        return Tensor._from_op(np.log(x), (self,), lambda g: (g / x,), "log")

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * out,), "exp")

    def sqrt(self) -> "Tensor":
        x = self.data
        if np.any(x < 0):
            raise NumericsError("sqrt of negative value")
        out = np.sqrt(x)
        return Tensor._from_op(out, (self,), lambda g: (g * 0.5 / out,), "sqrt")

    def square(self) -> "Tensor":
        x = self.data
        return Tensor._from_op(x * x, (self,), lambda g: (g * 2.0 * x,), "square")

    def sigmoid(self) -> "Tensor":
        out = expit(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * out * (1.0 - out),), "sigmoid")

    def softplus(self) -> "Tensor":
        # log(1 + e^x) via logaddexp: exact and overflow-safe, no threshold branch
        out = np.logaddexp(0.0, self.data)
        s = expit(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * s,), "softplus")


TensorLike = Union[Tensor, float, int, np.ndarray]


def _as_tensor(x: TensorLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(data, ts, vjp, "concat")


def maximum(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = np.maximum(a.data, b.data)
    pick_a = a.data >= b.data  # ties route the gradient to the first argument

    def vjp(g):
        return (
            _unbroadcast(np.where(pick_a, g, 0.0), a.shape),
            _unbroadcast(np.where(pick_a, 0.0, g), b.shape),
        )

    return Tensor._from_op(data, (a, b), vjp, "maximum")


def take_rows(t: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows ``t[index]``; adjoint scatter-adds into the source rows."""
    index = np.asarray(index, dtype=np.intp)
    if index.size and (index.min() < 0 or index.max() >= t.shape[0]):
        raise ShapeError("row index out of range")
    data = t.data[index]
    n_rows = t.shape[0]

    def vjp(g):
        full = np.zeros((n_rows,) + g.shape[1:])
        np.add.at(full, index, g)
        return (full,)

    return Tensor._from_op(data, (t,), vjp, "take_rows")


def segment_sum(t: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of ``t`` into ``num_segments`` buckets; empty buckets are zero."""
    segment_ids = np.asarray(segment_ids, dtype=np.intp)
    if segment_ids.shape != (t.shape[0],):
        raise ShapeError("segment_ids must have one id per row")
    if segment_ids.size and (segment_ids.min() < 0 or segment_ids.max() >= num_segments):
        raise ShapeError("segment id out of range")
    data = np.zeros((num_segments,) + t.shape[1:])
    np.add.at(data, segment_ids, t.data)

    def vjp(g):
        return (g[segment_ids],)

    return Tensor._from_op(data, (t,), vjp, "segment_sum")


def backward(root: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse-mode sweep from a scalar ``root``.

    Returns a mapping from each reachable ``requires_grad`` leaf to its
    gradient, and mirrors the gradients onto ``leaf.grad``.  A root with no
    recorded dependencies yields an empty mapping.
    """
    if root.size != 1:
        raise ShapeError("backward root must be a scalar")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    leaves: dict[Tensor, np.ndarray] = {}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is None:
            if node.requires_grad:
                node.grad = g
                leaves[node] = g
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return leaves
