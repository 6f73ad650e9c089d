"""Reverse-mode automatic differentiation over dense float64 tensors.

The engine is deliberately small: a `Tensor` wraps a numpy float64 array, a
`Tape` records every differentiable operation executed while it is active on
the current thread, and `Tape.backward` replays the record in reverse
execution order (which is a reverse topological order of the forward DAG).

Gradients of `Parameter` leaves accumulate additively into their persistent
`.grad` buffers; gradients of intermediate tensors live only for the duration
of one backward pass, so calling backward twice on the same tape doubles
parameter gradients exactly.
"""

from __future__ import annotations

import threading

import numpy as np

from skelwatch.errors import ContractError, DimensionError

MAX_RANK = 4

_local = threading.local()


class Tensor:
    """Dense row-major float64 tensor of rank up to 4."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > MAX_RANK:
            raise DimensionError(f"tensors are limited to rank {MAX_RANK}, got rank {arr.ndim}")
        self.data = arr
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Trainable tensor with a persistent gradient buffer and a unique name."""

    __slots__ = ("name", "grad")

    def __init__(self, value, name: str):
        super().__init__(value, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class _Node:
    __slots__ = ("outputs", "backward")

    def __init__(self, outputs, backward):
        self.outputs = outputs
        self.backward = backward


def active_tape():
    """The tape currently recording on this thread, or None."""
    return getattr(_local, "tape", None)


def accumulate(grads: dict, tensor: Tensor, g: np.ndarray):
    """Add an upstream gradient contribution to `tensor`.

    Parameters receive it in their persistent buffer; intermediates in the
    per-pass `grads` dict keyed by object identity.
    """
    if isinstance(tensor, Parameter):
        tensor.grad += g
    elif tensor.requires_grad:
        key = id(tensor)
        prev = grads.get(key)
        grads[key] = g if prev is None else prev + g


class Tape:
    """Ordered record of differentiable operations for one forward pass.

    Used as a context manager; operations executed inside the `with` block on
    the same thread are recorded. Tapes on different threads are independent.
    """

    def __init__(self):
        self._nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        if active_tape() is not None:
            raise ContractError("a tape is already recording on this thread")
        _local.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _local.tape = None
        return False

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, outputs: tuple, backward):
        self._nodes.append(_Node(outputs, backward))

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(param) into every reachable Parameter's grad."""
        if not isinstance(loss, Tensor):
            raise ContractError("backward expects a Tensor loss")
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {}
        if isinstance(loss, Parameter):
            loss.grad += np.ones_like(loss.data)
            return
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            gs = tuple(grads.pop(id(out), None) for out in node.outputs)
            if all(g is None for g in gs):
                continue
            node.backward(gs, grads)


def backward(loss: Tensor, tape: Tape):
    """Functional alias for `tape.backward(loss)`."""
    tape.backward(loss)
