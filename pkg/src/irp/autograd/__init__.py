"""Minimal reverse-mode automatic differentiation over float64 arrays."""

from . import ops
from .gradcheck import grad_check, relative_error
from .optim import OptimizerState, adamw_step
from .tensor import NonFiniteError, Tape, TapeError, Tensor

__all__ = [
    "NonFiniteError",
    "OptimizerState",
    "Tape",
    "TapeError",
    "Tensor",
    "adamw_step",
    "grad_check",
    "ops",
    "relative_error",
]
