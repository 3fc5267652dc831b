"""Dense tensors with reverse-mode differentiation.

Broadcasting is restricted to trailing-dimension alignment: for a binary
op the lower-rank operand's shape must equal the trailing dimensions of the
other operand's shape (a 0-d scalar always qualifies). Size-1 expansion
needs an explicit :func:`broadcast`.

Training runs in float32 by default; wrap gradient checks in
``with precision(np.float64):``. Results are bit-stable for a fixed BLAS
thread count.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from marcel.errors import InvalidArgument, ShapeMismatch

_default_dtype = np.dtype(np.float32)


def get_default_dtype() -> np.dtype:
    return _default_dtype


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype.kind != "f":
        raise InvalidArgument(f"default dtype must be floating point, got {dtype}")
    _default_dtype = dtype


@contextlib.contextmanager
def precision(dtype):
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype.kind == "f":
                dtype = data.dtype
            else:
                dtype = _default_dtype
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.op = "leaf"

    # -- introspection -------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag}, op={self.op})"

    def __len__(self):
        return self.shape[0]

    # -- operators -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def max(self, axis=None, keepdims=False):
        return max(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else _default_dtype))


def _node(data, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    out.op = op
    return out


def _result_shape(a: tuple, b: tuple, op: str) -> tuple:
    if a == b:
        return a
    if len(a) <= len(b) and tuple(b[len(b) - len(a):]) == tuple(a):
        return b
    if len(b) < len(a) and tuple(a[len(a) - len(b):]) == tuple(b):
        return a
    raise ShapeMismatch(f"{op}: shapes {a} and {b} are not trailing-dimension aligned")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g


def _binary(a, b, op):
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    _result_shape(a.shape, b.shape, op)
    return a, b


# -- elementwise binary ------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _binary(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _binary(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _node(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _binary(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = _binary(a, b, "div")
    out = a.data / b.data

    def backward(g):
        gb = g / b.data
        return _unbroadcast(gb, a.shape), _unbroadcast(-gb * out, b.shape)

    return _node(out, (a, b), backward, "div")


# -- elementwise unary -------------------------------------------------------

def neg(x) -> Tensor:
    x = as_tensor(x)
    return _node(-x.data, (x,), lambda g: (-g,), "neg")


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _node(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    return _node(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _node(out, (x,), lambda g: (g * (1 - out * out),), "tanh")


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return _node(out, (x,), lambda g: (g * 0.5 / out,), "sqrt")


def cos(x) -> Tensor:
    x = as_tensor(x)
    return _node(np.cos(x.data), (x,), lambda g: (-g * np.sin(x.data),), "cos")


def power(x, exponent: float) -> Tensor:
    x = as_tensor(x)
    p = float(exponent)
    out = x.data ** p
    return _node(out, (x,), lambda g: (g * p * x.data ** (p - 1),), "power")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _node(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,), "relu")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = _sigmoid(x.data)
    return _node(out, (x,), lambda g: (g * out * (1 - out),), "sigmoid")


def _sigmoid(v: np.ndarray, e: np.ndarray | None = None) -> np.ndarray:
    # e = exp(-|v|) keeps both branches overflow-free
    e = np.exp(-np.abs(v)) if e is None else e
    return np.where(v >= 0, 1.0, e) / (1.0 + e)


_LN2 = float(np.log(2.0))


def shifted_softplus(x) -> Tensor:
    """ln(0.5 e^x + 0.5), zero at the origin."""
    x = as_tensor(x)
    e = np.exp(-np.abs(x.data))
    out = np.maximum(x.data, 0) + np.log1p(e) - x.dtype.type(_LN2)
    return _node(out, (x,), lambda g: (g * _sigmoid(x.data, e),), "shifted_softplus")


# -- linear algebra / shape --------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} are incompatible")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _node(a.data @ b.data, (a, b), backward, "matmul")


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeMismatch(f"transpose expects a matrix, got shape {x.shape}")
    return _node(x.data.T, (x,), lambda g: (g.T,), "transpose")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return _node(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def broadcast(x, shape) -> Tensor:
    """Explicit numpy-style expansion (size-1 and leading dimensions)."""
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise ShapeMismatch(f"broadcast: cannot expand {x.shape} to {shape}") from None

    def backward(g):
        extra = len(shape) - x.ndim
        g = g.sum(axis=tuple(range(extra))) if extra else g
        axes = tuple(k for k, n in enumerate(x.shape) if n == 1 and g.shape[k] != 1)
        return (g.sum(axis=axes, keepdims=True) if axes else g,)

    return _node(np.ascontiguousarray(out), (x,), backward, "broadcast")


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise InvalidArgument("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeMismatch("concat: incompatible shapes " + ", ".join(str(t.shape) for t in ts)) from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(out, ts, backward, "concat")


# -- reductions --------------------------------------------------------------

def _expand(g: np.ndarray, shape: tuple, axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)
    return _node(out, (x,), lambda g: (_expand(g, x.shape, axis, keepdims),), "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.size / (out.size or 1)
    return _node(out, (x,), lambda g: (_expand(g, x.shape, axis, keepdims) / count,), "mean")


def max(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Maximum; the gradient is shared equally among tied maxima."""
    x = as_tensor(x)
    out = x.data.max(axis=axis, keepdims=keepdims)

    def backward(g):
        full = _expand(out, x.shape, axis, keepdims)
        mask = (x.data == full).astype(x.dtype)
        mask /= mask.sum(axis=axis, keepdims=True)
        return (_expand(g, x.shape, axis, keepdims) * mask,)

    return _node(out, (x,), backward, "max")


def softmax(x, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``; entries where ``mask`` is False get zero probability."""
    x = as_tensor(x)
    z = x.data if mask is None else np.where(mask, x.data, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = (e / e.sum(axis=axis, keepdims=True)).astype(x.dtype)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _node(out, (x,), backward, "softmax")


# -- indexing ----------------------------------------------------------------

def _rows(index) -> np.ndarray:
    idx = np.asarray(index)
    if idx.dtype.kind not in "iu":
        if idx.size == 0:
            return idx.astype(np.int64)
        raise InvalidArgument("row indices must be integers")
    return idx


def segment_sum(values: np.ndarray, idx: np.ndarray, size: int) -> np.ndarray:
    """``out[idx[k]] += values[k]`` with a fixed (index-sorted, stable) summation order."""
    out = np.zeros((size,) + values.shape[1:], dtype=values.dtype)
    if idx.size == 0:
        return out
    if idx.min() < 0 or idx.max() >= size:
        raise InvalidArgument(f"segment index out of range for {size} slots")
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])
    out[sorted_idx[starts]] = np.add.reduceat(values[order], starts, axis=0)
    return out


def index_select(x, rows) -> Tensor:
    """Gather rows along axis 0."""
    x = as_tensor(x)
    idx = _rows(rows)

    def backward(g):
        return (segment_sum(g, idx, x.shape[0]),)

    return _node(x.data[idx], (x,), backward, "index_select")


def scatter_add(x, rows, size: int) -> Tensor:
    """Sum rows of ``x`` into ``size`` slots: ``out[rows[k]] += x[k]``."""
    x = as_tensor(x)
    idx = _rows(rows)
    if idx.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"scatter_add: {idx.shape[0]} indices for {x.shape[0]} rows")
    out = segment_sum(x.data, idx, size)
    return _node(out, (x,), lambda g: (g[idx],), "scatter_add")


# -- differentiation ---------------------------------------------------------

def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``loss`` for every leaf that requires gradients.

    Leaves listed in ``params`` but unreachable from ``loss`` get zeros.
    Each leaf's ``.grad`` is overwritten with its gradient.
    """
    if loss.size != 1:
        raise InvalidArgument(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {}
    leaves: dict[Tensor, np.ndarray] = {}
    if loss.requires_grad:
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(_topological(loss)):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                leaves[node] = leaves[node] + g if node in leaves else g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = np.asarray(pg, dtype=parent.dtype)
                if pg.shape != parent.shape:
                    pg = np.broadcast_to(pg, parent.shape)
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg.copy()
    if params is not None:
        for p in params:
            if p not in leaves:
                leaves[p] = np.zeros_like(p.data)
    for p, g in leaves.items():
        p.grad = g
    return leaves
