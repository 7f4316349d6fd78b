"""Dense float64 tensors with a per-thread reverse-mode tape."""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterator, Sequence

import numpy as np


class NumericalError(ValueError):
    """Raised when a value would become NaN or infinite."""


class TapeError(RuntimeError):
    """Raised on misuse of the gradient tape."""


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class _Record:
    __slots__ = ("inputs", "output", "backward")

    def __init__(self, inputs, output, backward):
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """Ordered log of differentiable operations.

    Records are appended in execution order, so every record's inputs were
    produced by an earlier record or are leaves. A tape supports exactly one
    backward pass; afterwards it is spent and a fresh tape takes over.
    """

    def __init__(self) -> None:
        self.records: list[_Record] = []
        self.spent = False

    def __len__(self) -> int:
        return len(self.records)

    def record(self, inputs, output, backward) -> None:
        if self.spent:
            raise TapeError("cannot record on a spent tape")
        self.records.append(_Record(tuple(inputs), output, backward))


_state = threading.local()


def current_tape() -> Tape:
    tape = getattr(_state, "tape", None)
    if tape is None or tape.spent:
        tape = Tape()
        _state.tape = tape
    return tape


def reset_tape() -> Tape:
    """Discard the current tape and start an empty one."""
    _state.tape = Tape()
    return _state.tape


def _grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording for the enclosed block (inference)."""
    prev = _grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def _check_finite(arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NumericalError("non-finite value in tensor data")


class Tensor:
    """Immutable n-d float64 array that can take part in the gradient tape.

    Leaves created with ``requires_grad=True`` own a ``grad`` buffer of the
    same shape; intermediate results never retain gradients.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape", "__weakref__")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if any(n <= 0 for n in arr.shape):
            raise ValueError(f"tensor extents must be positive, got {arr.shape}")
        _check_finite(arr)
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if self.requires_grad else None
        self.name = name
        self._tape: Tape | None = None

    @classmethod
    def _from_op(cls, data: np.ndarray, inputs: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        out = cls.__new__(cls)
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr)
        arr.flags.writeable = False
        out.data = arr
        out.grad = None
        out.name = None
        out._tape = None
        needs = _grad_enabled() and any(t.requires_grad for t in inputs)
        out.requires_grad = needs
        if needs:
            tape = current_tape()
            tape.record(inputs, out, backward)
            out._tape = tape
        return out

    @property
    def is_leaf(self) -> bool:
        return self._tape is None

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
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def assign(self, values: np.ndarray) -> None:
        """Rebind a leaf's data (optimizer updates); shape must not change."""
        if not self.is_leaf:
            raise TapeError("only leaf tensors can be reassigned")
        arr = np.array(values, dtype=np.float64)
        if arr.shape != self.data.shape:
            raise ValueError(f"shape mismatch on assign: {arr.shape} vs {self.data.shape}")
        _check_finite(arr)
        arr.flags.writeable = False
        self.data = arr

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # Operators are bound in ops.py to avoid a circular import.


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf.

    A loss that does not depend on any grad-requiring tensor leaves all
    gradients untouched. Calling backward twice on the same tape raises.
    """
    if loss.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    tape = loss._tape
    if tape is None:
        # a leaf used directly as the loss
        loss.grad = loss.grad + np.ones_like(loss.data)
        return
    if tape.spent:
        raise TapeError("backward already ran on this tape; run a new forward pass")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        in_grads = rec.backward(g)
        for inp, ig in zip(rec.inputs, in_grads):
            if ig is None or not inp.requires_grad:
                continue
            if ig.shape != inp.shape:
                raise TapeError(f"gradient shape {ig.shape} does not match input {inp.shape}")
            if inp.is_leaf:
                inp.grad = inp.grad + ig
            else:
                key = id(inp)
                prev = grads.get(key)
                grads[key] = ig if prev is None else prev + ig
    tape.spent = True
    tape.records.clear()
    if getattr(_state, "tape", None) is tape:
        _state.tape = Tape()
