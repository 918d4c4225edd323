"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Operations performed while a `Tape` is active are recorded on it when at least
one input requires a gradient. `backward` then walks the tape in reverse, so
every node is visited exactly once and its inputs always precede it.
"""
from __future__ import annotations

import contextvars
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Optional, Union

import numpy as np

from src.utils.errors import ContractError, DimensionError


ArrayLike = Union['Tensor', np.ndarray, float, int, Sequence[Any]]
BackwardFn = Callable[[np.ndarray], tuple[Optional[np.ndarray], ...]]

_ACTIVE_TAPE: contextvars.ContextVar[Optional['Tape']] = contextvars.ContextVar(
    'active_tape', default=None
)


class Tensor:
    """Row-major float64 array plus a requires-gradient flag."""

    __slots__ = ('data', 'requires_grad', 'name')

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

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
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def __repr__(self) -> str:
        label = f', name={self.name!r}' if self.name else ''
        return f'Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})'

    def __add__(self, other: ArrayLike) -> Tensor:
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> Tensor:
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> Tensor:
        return div(self, other)

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)

    def __matmul__(self, other: ArrayLike) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        return take(self, index)

    def sum(self, axis: Optional[int | tuple[int, ...]] = None, keepdims: bool = False) -> Tensor:
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis: Optional[int | tuple[int, ...]] = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis, keepdims)

    def reshape(self, *shape: int) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        return transpose(self, axes or None)


@dataclass(slots=True)
class Node:
    """One recorded primitive: output handle, input handles and local backward rule."""

    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: BackwardFn


class Tape:
    """Ordered record of primitive operations for one forward pass."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        self.nodes.append(node)


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording, e.g. for target-network evaluation inside a training step."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


class Gradients:
    """Gradient map keyed by tensor identity.

    Tensors that require a gradient but did not influence the loss map to zeros.
    """

    def __init__(self) -> None:
        self._grads: dict[int, tuple[Tensor, np.ndarray]] = {}

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        entry = self._grads.get(id(tensor))
        if entry is None:
            return np.zeros_like(tensor.data)
        return entry[1]

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def accumulate(self, tensor: Tensor, grad: np.ndarray) -> None:
        entry = self._grads.get(id(tensor))
        if entry is None:
            self._grads[id(tensor)] = (tensor, np.array(grad, dtype=np.float64))
        else:
            self._grads[id(tensor)] = (tensor, entry[1] + grad)

    def pop(self, tensor: Tensor) -> Optional[np.ndarray]:
        entry = self._grads.pop(id(tensor), None)
        return None if entry is None else entry[1]

    def global_norm(self, tensors: Sequence[Tensor]) -> float:
        return float(np.sqrt(sum(float(np.sum(self[t] ** 2)) for t in tensors)))


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Reverse pass over `tape` from the scalar `loss`.

    Returns:
        Gradients for every requires-gradient tensor reached from the loss.
    """
    if loss.size != 1:
        raise ContractError(f'backward needs a scalar loss, got shape {loss.shape}')
    working = Gradients()
    working.accumulate(loss, np.ones_like(loss.data))
    leaves = Gradients()
    produced: set[int] = set()
    for node in reversed(tape.nodes):
        produced.add(id(node.output))
        grad = working.pop(node.output)
        if grad is None:
            continue
        for tensor, local in zip(node.inputs, node.backward(grad)):
            if local is None or not tensor.requires_grad:
                continue
            working.accumulate(tensor, local)
    for tensor_id, (tensor, grad) in working._grads.items():
        if tensor_id not in produced:
            leaves.accumulate(tensor, grad)
    return leaves


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _emit(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], fn: BackwardFn) -> Tensor:
    out = Tensor(data)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(Node(op, out, inputs, fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _emit(
        'add',
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _emit(
        'sub',
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _emit(
        'mul',
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _emit(
        'div',
        out,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
    )


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product with numpy batching rules.

    Raises:
        DimensionError: If the inner extents disagree.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise DimensionError('matmul needs at least 1-D operands')
    inner_b = b.shape[-2] if b.ndim > 1 else b.shape[0]
    if a.shape[-1] != inner_b:
        raise DimensionError(f'matmul inner extents disagree: {a.shape} @ {b.shape}')

    def grad_fn(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if a.ndim == 1 and b.ndim == 1:
            return g * b.data, g * a.data
        ad = a.data[None, :] if a.ndim == 1 else a.data
        bd = b.data[:, None] if b.ndim == 1 else b.data
        gd = np.expand_dims(g, -2) if a.ndim == 1 else g
        gd = np.expand_dims(gd, -1) if b.ndim == 1 else gd
        ga = gd @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ gd
        if a.ndim == 1:
            ga = ga.squeeze(-2)
        if b.ndim == 1:
            gb = gb.squeeze(-1)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _emit('matmul', np.matmul(a.data, b.data), (a, b), grad_fn)


def exp(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _emit('exp', out, (x,), lambda g: (g * out,))


def log(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return _emit('log', np.log(x.data), (x,), lambda g: (g / x.data,))


def square(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return _emit('square', x.data * x.data, (x,), lambda g: (2.0 * x.data * g,))


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return _emit('relu', np.maximum(x.data, 0.0), (x,), lambda g: (g * (x.data > 0.0),))


def clip(x: ArrayLike, low: float, high: float) -> Tensor:
    x = as_tensor(x)
    inside = (x.data >= low) & (x.data <= high)
    return _emit('clip', np.clip(x.data, low, high), (x,), lambda g: (g * inside,))


def minimum(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data
    return _emit(
        'minimum',
        np.minimum(a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * pick_a, a.shape), _unbroadcast(g * ~pick_a, b.shape)),
    )


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axis: Any, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(sorted(a % len(shape) for a in axes))
        for a in axes:
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def tensor_sum(x: ArrayLike, axis: Any = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    return _emit(
        'sum',
        np.sum(x.data, axis=axis, keepdims=keepdims),
        (x,),
        lambda g: (_expand_reduced(g, x.shape, axis, keepdims),),
    )


def mean(x: ArrayLike, axis: Any = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return tensor_sum(x, axis, keepdims) / float(count)


def reshape(x: ArrayLike, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f'cannot reshape {x.shape} into {shape}') from exc
    return _emit('reshape', out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    perm = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(perm))
    return _emit('transpose', np.transpose(x.data, perm), (x,), lambda g: (np.transpose(g, inverse),))


def swap_last(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    perm = list(range(x.ndim))
    perm[-1], perm[-2] = perm[-2], perm[-1]
    return transpose(x, perm)


def _is_advanced(index: Any) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return any(isinstance(p, (list, np.ndarray)) for p in parts)


def take(x: ArrayLike, index: Any) -> Tensor:
    """Indexing (basic or advanced) with a scatter-add gradient."""
    x = as_tensor(x)
    advanced = _is_advanced(index)

    def grad_fn(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(x.data)
        if advanced:
            np.add.at(full, index, g)
        else:
            full[index] += g
        return (full,)

    return _emit('take', np.array(x.data[index]), (x,), grad_fn)


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _emit(
        'concat',
        np.concatenate([p.data for p in parts], axis=axis),
        parts,
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    out = np.stack([p.data for p in parts], axis=axis)
    axis_ = axis % out.ndim
    return _emit(
        'stack',
        out,
        parts,
        lambda g: tuple(np.take(g, i, axis=axis_) for i in range(len(parts))),
    )


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    """Max-subtracted softmax; outputs are nonnegative and sum to one along `axis`."""
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)
    return _emit(
        'softmax',
        out,
        (x,),
        lambda g: (out * (g - np.sum(g * out, axis=axis, keepdims=True)),),
    )


def log_softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    probs = np.exp(out)
    return _emit(
        'log_softmax',
        out,
        (x,),
        lambda g: (g - probs * np.sum(g, axis=axis, keepdims=True),),
    )
