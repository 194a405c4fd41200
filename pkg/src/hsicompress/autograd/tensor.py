"""Dense tensors with tape-based reverse-mode differentiation.

Every differentiable op records its parents and a closure that maps the
output gradient to parent gradients. ``Tensor.backward`` replays those
records in reverse topological order, visiting each node exactly once, and
accumulates into ``.grad`` of leaf tensors that require gradients.

After a backward pass the recorded graph is released ("consumed") unless
``retain_graph=True``; calling ``backward`` again on a consumed root raises.
Leaf gradients accumulate across calls until they are cleared explicitly.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_grad_enabled = True


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


def _as_float_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float32)
    return arr


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def make_op(data, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
    """Wrap ``data`` as the output of an op with the given backward closure.

    ``backward(g)`` must return one gradient (or None) per parent.
    """
    data = np.asarray(data)
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    return out


def as_tensor(x, like: "Tensor | None" = None) -> "Tensor":
    """Wrap ``x``; plain scalars/arrays take ``like``'s dtype so f32 graphs stay f32."""
    if isinstance(x, Tensor):
        return x
    if like is not None:
        return Tensor(np.asarray(x, dtype=like.dtype))
    return Tensor(x)


class Tensor:
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_float_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._op = "leaf"
        self._consumed = False

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
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

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() needs a one-element tensor")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- autodiff ---------------------------------------------------------
    def backward(self, grad=None, retain_graph: bool = False) -> None:
        if self._consumed:
            raise RuntimeError("tape consumed: backward() already ran on this graph "
                               "without retain_graph=True")
        if grad is None:
            if self.data.size != 1:
                raise ValueError(f"backward() without an explicit gradient needs a scalar "
                                 f"root, got shape {self.shape}")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.dtype).reshape(self.shape)

        order = self._topological_order()
        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

        if not retain_graph:
            for node in order:
                if node._backward is not None:
                    node._backward = None
                    node._parents = ()
                    node._consumed = True

    def _topological_order(self) -> list["Tensor"]:
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
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return order

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other, like=self)
        a_shape, b_shape = self.shape, other.shape
        return make_op(self.data + other.data, (self, other),
                       lambda g: (unbroadcast(g, a_shape), unbroadcast(g, b_shape)), "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other, like=self)
        a_shape, b_shape = self.shape, other.shape
        return make_op(self.data - other.data, (self, other),
                       lambda g: (unbroadcast(g, a_shape), unbroadcast(-g, b_shape)), "sub")

    def __rsub__(self, other):
        return as_tensor(other, like=self) - self

    def __mul__(self, other):
        other = as_tensor(other, like=self)
        a, b = self.data, other.data
        return make_op(a * b, (self, other),
                       lambda g: (unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other, like=self)
        a, b = self.data, other.data
        return make_op(a / b, (self, other),
                       lambda g: (unbroadcast(g / b, a.shape),
                                  unbroadcast(-g * a / (b * b), b.shape)), "div")

    def __rtruediv__(self, other):
        return as_tensor(other, like=self) / self

    def __neg__(self):
        return make_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, exponent: float):
        if isinstance(exponent, Tensor):
            raise TypeError("only scalar exponents are supported")
        a = self.data
        exponent = float(exponent)
        return make_op(a ** a.dtype.type(exponent), (self,),
                       lambda g: (g * exponent * a ** (exponent - 1),), "pow")

    def __matmul__(self, other):
        other = as_tensor(other, like=self)
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")

        def backward(g):
            return g @ b.T, a.T @ g

        return make_op(a @ b, (self, other), backward, "matmul")

    # -- elementwise ------------------------------------------------------
    def exp(self):
        out = np.exp(self.data)
        return make_op(out, (self,), lambda g: (g * out,), "exp")

    def log(self):
        a = self.data
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(a)
        return make_op(out, (self,), lambda g: (g / a,), "log")

    def sqrt(self):
        out = np.sqrt(self.data)
        return make_op(out, (self,), lambda g: (g * 0.5 / out,), "sqrt")

    def abs(self):
        a = self.data
        return make_op(np.abs(a), (self,), lambda g: (g * np.sign(a),), "abs")

    def relu(self):
        a = self.data
        mask = a > 0
        return make_op(np.where(mask, a, 0).astype(a.dtype), (self,),
                       lambda g: (g * mask,), "relu")

    # -- reductions & shape -----------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return make_op(np.asarray(self.data.sum(axis=axis, keepdims=keepdims)), (self,),
                       backward, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return make_op(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),), "reshape")

    def flatten(self, start: int = 1):
        return self.reshape(self.shape[:start] + (-1,))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return make_op(self.data.transpose(axes), (self,),
                       lambda g: (g.transpose(inverse),), "transpose")

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, index):
        shape, dtype = self.shape, self.dtype
        if isinstance(index, Tensor):
            index = index.data.astype(np.int64)

        def backward(g):
            full = np.zeros(shape, dtype=dtype)
            np.add.at(full, index, g)
            return (full,)

        return make_op(np.asarray(self.data[index]), (self,), backward, "getitem")


def stack(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make_op(data, tensors, backward, "stack")


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(np.take(g, range(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return make_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward,
                   "concat")
