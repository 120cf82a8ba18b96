"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every operation on tensors that require gradients records its inputs and a
local gradient rule on the output tensor.  :func:`backward` orders the
recorded graph topologically (the *tape*) and replays it in reverse.

Gradients accumulate into ``Tensor.grad`` across calls until
:meth:`Tensor.zero_grad` (or :func:`zero_grad`) resets them.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import ContractError, DegenerateRowError, ShapeError

DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operators ----------------------------------------------------------
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

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _record(data: np.ndarray, parents: Sequence[Tensor], rule: Callable) -> Tensor:
    """Wrap ``data`` and, if any parent needs a gradient, attach ``rule``.

    ``rule(g)`` maps the output gradient to one gradient (or ``None``) per parent.
    """
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = rule
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- tape -------------------------------------------------------------------
def build_tape(root: Tensor) -> list[Tensor]:
    """Return the recorded ancestors of ``root`` in topological order."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every gradient-requiring leaf reachable from a scalar loss.

    Intermediate results are not given a ``grad``; only tensors created by the
    caller with ``requires_grad=True`` are.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    tape = build_tape(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape):
        g = grads.get(id(node))
        if g is None or node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    for node in tape:
        g = grads.get(id(node))
        if g is None or node._backward is not None:
            continue
        g = np.asarray(g, dtype=DTYPE).reshape(node.shape)
        node.grad = g.copy() if node.grad is None else node.grad + g


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# -- elementwise ------------------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data / b.data, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data ** exponent
    return _record(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _record(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    active = a.data > 0
    return _record(np.where(active, a.data, 0.0), (a,), lambda g: (g * active,))


def leaky_relu(a: Tensor, slope: float = 0.1) -> Tensor:
    active = a.data > 0
    factor = np.where(active, 1.0, slope)
    return _record(a.data * factor, (a,), lambda g: (g * factor,))


def masked_fill(a: Tensor, mask, value: float) -> Tensor:
    """Replace entries where ``mask`` is true with ``value``."""
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    return _record(np.where(mask, value, a.data), (a,), lambda g: (np.where(mask, 0.0, g),))


# -- reductions and shape ---------------------------------------------------
def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return _record(np.asarray(out, dtype=DTYPE), (a,), rule)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def tmax(a: Tensor, axis: int) -> Tensor:
    """Maximum along ``axis``; the gradient goes to the first maximal entry."""
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def rule(g):
        grad = np.zeros_like(a.data)
        np.put_along_axis(grad, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return _record(out, (a,), rule)


def reshape(a: Tensor, shape) -> Tensor:
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes=None) -> Tensor:
    inverse = None if axes is None else tuple(np.argsort(axes))
    return _record(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def swapaxes(a: Tensor, ax1: int = -1, ax2: int = -2) -> Tensor:
    return _record(np.swapaxes(a.data, ax1, ax2), (a,), lambda g: (np.swapaxes(g, ax1, ax2),))


def getitem(a: Tensor, index) -> Tensor:
    if isinstance(index, Tensor):
        index = index.data.astype(np.int64)

    def rule(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _record(np.array(a.data[index], dtype=DTYPE), (a,), rule)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join tensors along ``axis``; the backward pass slices the gradient back."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    ax = axis % ndim if ndim else 0
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax):
            raise ShapeError(
                f"cannot concatenate shapes {[x.shape for x in tensors]} along axis {axis}")
    offsets = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def rule(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=ax) for i in range(len(tensors)))

    return _record(np.concatenate([t.data for t in tensors], axis=ax), tensors, rule)


def split(a: Tensor, sizes: Sequence[int], axis: int = 0) -> list[Tensor]:
    if sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover axis of length {a.shape[axis]}")
    parts, start = [], 0
    for size in sizes:
        index = [slice(None)] * a.ndim
        index[axis] = slice(start, start + size)
        parts.append(getitem(a, tuple(index)))
        start += size
    return parts


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        shape = list(t.shape)
        shape.insert(axis % (t.ndim + 1), 1)
        expanded.append(reshape(t, tuple(shape)))
    return concat(expanded, axis=axis)


# -- linear algebra -----------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product, batched over leading axes for 3-D operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise ShapeError(f"matmul batch mismatch: {a.shape} @ {b.shape}")

    def rule(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        return (None if ga is None else _unbroadcast(ga, a.shape),
                None if gb is None else _unbroadcast(gb, b.shape))

    return _record(np.matmul(a.data, b.data), (a, b), rule)


# -- normalisation and losses -----------------------------------------------
def softmax_rows(x: Tensor, mask=None) -> Tensor:
    """Softmax over the last axis, with masked entries forced to exactly 0."""
    data = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), data.shape)
        if not mask.any(axis=-1).all():
            raise DegenerateRowError("softmax row has every entry masked")
        shifted = np.where(mask, data, -np.inf)
        shifted = shifted - shifted.max(axis=-1, keepdims=True)
        e = np.where(mask, np.exp(shifted), 0.0)
    else:
        e = np.exp(data - data.max(axis=-1, keepdims=True))
    out = e / e.sum(axis=-1, keepdims=True)

    def rule(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _record(out, (x,), rule)


def log_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)
    return _record(out, (x,), lambda g: (g - probs * g.sum(axis=-1, keepdims=True),))


def cross_entropy(logits: Tensor, targets, logit_mask=None, weights=None) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under ``logits`` (N x C).

    ``logit_mask`` excludes candidate classes per row; ``weights`` (N,) excludes
    rows (e.g. padding) from the mean when zero.
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects N x C logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=DTYPE)
    total = w.sum()
    if total <= 0:
        raise ContractError("cross_entropy needs at least one weighted row")
    data = logits.data
    if logit_mask is not None:
        logit_mask = np.asarray(logit_mask, dtype=bool) | (w <= 0)[:, None]
        data = np.where(logit_mask, data, -np.inf)
    shifted = data - data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=-1, keepdims=True)
    rows = np.arange(n)
    picked = probs[rows, targets]
    if np.any((picked <= 0) & (w > 0)):
        raise ContractError("cross_entropy target falls on a masked class")
    nll = -np.log(np.where(w > 0, picked, 1.0))
    loss = np.asarray((w * nll).sum() / total)

    def rule(g):
        grad = probs.copy()
        grad[rows, targets] -= 1.0
        return (grad * (w / total)[:, None] * g,)

    return _record(loss, (logits,), rule)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; the identity outside training or at rate 0."""
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _record(x.data * keep, (x,), lambda g: (g * keep,))
