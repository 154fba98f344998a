"""Dense float64 tensors with reverse-mode differentiation.

Every operation on a :class:`Tensor` that involves a ``requires_grad`` input
returns a new node holding references to its parents plus a closure that maps
the output gradient onto the parents.  :func:`backward` walks the graph in
reverse topological order (the :class:`Tape`) and accumulates gradients.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class ContractError(ValueError):
    """Raised when a documented precondition is violated."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # Sum out axes that were introduced or stretched by numpy broadcasting.
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (),
                 _backward: Callable | None = None, op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward
        self.op = op

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
    def T(self) -> "Tensor":
        return self.transpose()

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    __hash__ = object.__hash__

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, tuple(parents), backward, op)
    return Tensor(data)


# ---------------------------------------------------------------------------
# elementwise binary
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _node(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _node(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _node(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def bw(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))
    return _node(out, (a, b), bw, "div")


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data

    def bw(g):
        return (_unbroadcast(np.where(pick_a, g, 0.0), a.shape),
                _unbroadcast(np.where(pick_a, 0.0, g), b.shape))
    return _node(np.minimum(a.data, b.data), (a, b), bw, "minimum")


def maximum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data >= b.data

    def bw(g):
        return (_unbroadcast(np.where(pick_a, g, 0.0), a.shape),
                _unbroadcast(np.where(pick_a, 0.0, g), b.shape))
    return _node(np.maximum(a.data, b.data), (a, b), bw, "maximum")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"inner dimensions disagree: {a.shape} @ {b.shape}")

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return _node(a.data @ b.data, (a, b), bw, "matmul")


# ---------------------------------------------------------------------------
# elementwise unary
# ---------------------------------------------------------------------------

def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        return (g * exponent * a.data ** (exponent - 1),)
    return _node(a.data ** exponent, (a,), bw, "pow")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _node(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = special.expit(a.data)
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def softplus(a) -> Tensor:
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)
    return _node(out, (a,), lambda g: (g * special.expit(a.data),), "softplus")


def lgamma(a) -> Tensor:
    a = as_tensor(a)
    return _node(special.gammaln(a.data), (a,),
                 lambda g: (g * special.digamma(a.data),), "lgamma")


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _node(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clip")


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)
    return _node(out, (a,), bw, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    inv = None if axes is None else tuple(np.argsort(axes))
    return _node(np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),), "transpose")


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)
    return _node(np.swapaxes(a.data, ax1, ax2), (a,),
                 lambda g: (np.swapaxes(g, ax1, ax2),), "swapaxes")


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        full = np.zeros(a.shape)
        np.add.at(full, index, g)
        return (full,)
    return _node(a.data[index], (a,), bw, "getitem")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, cuts, axis=axis))
    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))
    return _node(np.stack([t.data for t in tensors], axis=axis), tensors, bw, "stack")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return _node(out, (a,), bw, "softmax")


# ---------------------------------------------------------------------------
# tape and backward
# ---------------------------------------------------------------------------

class Tape:
    """Topologically ordered view of the graph that produced ``root``."""

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                self.nodes.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def backward(loss: Tensor, grad: np.ndarray | None = None) -> dict:
    """Accumulate d(loss)/d(node) into ``node.grad`` for every reachable node.

    Returns the gradient map keyed by tensor.  ``loss`` must be a scalar
    unless an explicit upstream ``grad`` is given.
    """
    if grad is None:
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grad = np.ones(loss.shape)
    tape = Tape(loss)
    grads: dict = {loss: np.asarray(grad, dtype=np.float64)}
    for node in reversed(tape.nodes):
        g = grads.get(node)
        if g is None:
            continue
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad or pg is None:
                continue
            if parent in grads:
                grads[parent] = grads[parent] + pg
            else:
                grads[parent] = pg
    for node, g in grads.items():
        node.grad = np.asarray(g, dtype=np.float64).reshape(node.shape)
    return grads


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
