"""Training objectives (BCE, soft precision, weighted sum) and hard metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, ops
from .autograd.tensor import as_tensor

LOSS_KINDS = ("bce", "precision", "sum")
DEFAULT_EPS = 1e-7


@dataclass(frozen=True)
class LossConfig:
    kind: str = "bce"
    alpha: float = 1.0
    beta_w: float = 1.0
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}")
        if self.alpha < 0 or self.beta_w < 0:
            raise ValueError("loss weights must be non-negative")
        if self.kind == "sum" and self.alpha + self.beta_w <= 0:
            raise ValueError("alpha + beta_w must be positive for the sum loss")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def _labels(y, n: int) -> np.ndarray:
    y = np.asarray(y.data if isinstance(y, Tensor) else y, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"length mismatch: {n} predictions vs {y.shape[0]} labels")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    return y


def bce_loss(p, y, epsilon: float = DEFAULT_EPS) -> Tensor:
    """Mean binary cross-entropy on probabilities clamped to [eps, 1 - eps]."""
    p = as_tensor(p)
    y = _labels(y, p.data.size)
    pc = ops.clip(ops.reshape(p, (-1,)), epsilon, 1.0 - epsilon)
    per_example = ops.add(ops.multiply(ops.log(pc), y), ops.multiply(ops.log(ops.sub(1.0, pc)), 1.0 - y))
    return ops.multiply(ops.mean(per_example), -1.0)


def precision_loss(y_hat, y, epsilon: float = DEFAULT_EPS) -> Tensor:
    """``1 - TP / (TP + FP + eps)`` with soft counts from sigmoid outputs."""
    y_hat = as_tensor(y_hat)
    y = _labels(y, y_hat.data.size)
    flat = ops.reshape(y_hat, (-1,))
    tp = ops.sum(ops.multiply(flat, y))
    fp = ops.sum(ops.multiply(flat, 1.0 - y))
    return ops.sub(1.0, ops.div(tp, ops.add(ops.add(tp, fp), epsilon)))


def combined_loss(p, y, config: LossConfig) -> Tensor:
    if config.kind == "bce":
        return bce_loss(p, y, config.epsilon)
    if config.kind == "precision":
        return precision_loss(p, y, config.epsilon)
    return ops.add(
        ops.multiply(bce_loss(p, y, config.epsilon), config.alpha),
        ops.multiply(precision_loss(p, y, config.epsilon), config.beta_w),
    )


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(p, y, threshold: float = 0.5) -> ConfusionCounts:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    y = _labels(y, p.shape[0]).astype(bool)
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    pred = p >= threshold
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred & y)),
        fp=int(np.count_nonzero(pred & ~y)),
        fn=int(np.count_nonzero(~pred & y)),
        tn=int(np.count_nonzero(~pred & ~y)),
    )


def precision(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0


def recall(c: ConfusionCounts) -> float:
    return c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0


def f_beta(p: float, r: float, beta: float = 0.5) -> float:
    b2 = beta * beta
    denom = b2 * p + r
    return (1.0 + b2) * p * r / denom if denom else 0.0
