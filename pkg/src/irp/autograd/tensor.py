"""Tensors and the tape that records operations for reverse-mode differentiation."""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or infinity."""


class TapeError(RuntimeError):
    pass


class Tensor:
    """A float64 array, optionally tracked for gradients.

    Leaves created with ``requires_grad=True`` are the trainable parameters;
    every op result that depends on one is tracked while a :class:`Tape` is
    active.
    """

    __slots__ = ("data", "requires_grad", "name", "__weakref__")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}{flag})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from .ops import multiply
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from .ops import div
        return div(self, other)

    def __rtruediv__(self, other):
        from .ops import div
        return div(other, self)

    def __neg__(self):
        from .ops import multiply
        return multiply(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class _Record:
    __slots__ = ("inputs", "output", "backward")

    def __init__(self, inputs, output, backward):
        self.inputs = inputs
        self.output = output
        self.backward = backward


_state = threading.local()


def active_tape() -> "Tape | None":
    return getattr(_state, "tape", None)


class Tape:
    """Records differentiable operations executed inside ``with Tape():``.

    >>> from irp.autograd import ops
    >>> w = Tensor([1.0, 2.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = ops.sum(w)
    >>> tape.backward(loss)[w]
    array([1., 1.])
    """

    def __init__(self):
        self.records: list[_Record] = []
        self._used = False
        self._outer = None

    def __enter__(self) -> "Tape":
        self._outer = active_tape()
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = self._outer
        return False

    def record(self, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> None:
        if self._used:
            raise TapeError("tape already consumed by backward()")
        self.records.append(_Record(tuple(inputs), output, backward))

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Propagate d(loss)/d(.) back through the recording.

        Returns a mapping from every gradient-requiring leaf to its gradient.
        Fan-out contributions are summed.
        """
        if self._used:
            raise TapeError("tape already consumed; record a fresh forward pass")
        if loss.data.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        self._used = True
        produced = {id(r.output) for r in self.records}
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.output), None)
            if g is None:
                continue
            in_grads = rec.backward(g)
            for t, gi in zip(rec.inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                key = id(t)
                if key not in produced:
                    leaves[key] = t
                prev = grads.get(key)
                grads[key] = gi if prev is None else prev + gi
        if id(loss) not in produced and loss.requires_grad:
            leaves[id(loss)] = loss
        return {t: grads[k] for k, t in leaves.items() if k in grads}


def check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by {op}")
    return arr


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)
