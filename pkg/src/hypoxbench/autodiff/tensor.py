"""Tensor and tape for reverse-mode differentiation.

A :class:`Tensor` wraps a numpy array.  Every primitive that consumes at
least one tensor with ``requires_grad`` appends its output node to the
thread-local :class:`Tape`.  Because nodes are appended in creation order
the tape is already topologically sorted; :func:`backward` walks it in
reverse, visits each node once and clears it.
"""
from __future__ import annotations

import contextlib
import itertools
import threading
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ContractError, NumericError

_local = threading.local()
_ids = itertools.count()


class Tape:
    """Ordered record of the differentiable nodes created on this thread."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.enabled = True

    def record(self, node: "Tensor") -> None:
        self.nodes.append(node)

    def clear(self) -> None:
        self.nodes.clear()

    def __len__(self) -> int:
        return len(self.nodes)


def get_tape() -> Tape:
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = _local.tape = Tape()
    return tape


@contextlib.contextmanager
def no_grad():
    """Disable recording, e.g. for inference."""
    tape = get_tape()
    prev = tape.enabled
    tape.enabled = False
    try:
        yield
    finally:
        tape.enabled = prev


def _default_dtype(data) -> np.dtype:
    if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
        return data.dtype
    return np.dtype(np.float64)


class Tensor:
    """Differentiable n-dimensional array (row-major, numpy-backed)."""

    __slots__ = ("data", "grad", "requires_grad", "node_id", "op", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        dtype = dtype or _default_dtype(data)
        self.data = np.asarray(data, dtype=dtype, order="C")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node_id = next(_ids)
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __len__(self):
        return self.data.shape[0]

    # operator sugar; the implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, idx):
        from . import ops
        return ops.getitem(self, idx)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        return ops.transpose(self, axes or None)


def as_tensor(x, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype or np.float64))


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    """Wrap a primitive's forward value and record it when gradients are needed.

    ``backward`` receives the upstream gradient and returns one gradient (or
    ``None``) per parent, possibly still broadcast.
    """
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{op}: non-finite value in forward pass")
    out = Tensor(data)
    out.op = op
    tape = get_tape()
    if tape.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        tape.record(out)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf requiring grad."""
    if not isinstance(loss, Tensor) or loss.ndim != 0:
        raise ContractError("backward: loss must be a scalar tensor")
    tape = get_tape()
    if not len(tape) or not loss.requires_grad:
        raise ContractError("backward: nothing recorded on the tape")
    loss.grad = np.ones_like(loss.data)
    try:
        for node in reversed(tape.nodes):
            g = node.grad
            if g is None:
                node._backward = None
                node._parents = ()
                continue
            grads = node._backward(g)
            for parent, pg in zip(node._parents, grads):
                if pg is None or not parent.requires_grad:
                    continue
                pg = unbroadcast(np.asarray(pg, dtype=parent.dtype), parent.shape)
                parent.grad = pg if parent.grad is None else parent.grad + pg
            # release interior state; leaves are never on the tape
            node.grad = None
            node._backward = None
            node._parents = ()
    finally:
        tape.clear()


def parameter(data, name: Optional[str] = None, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype, name=name)
