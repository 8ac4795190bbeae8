"""Central finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


def relative_error(analytic, numeric) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / (np.abs(a) + np.abs(n) + 1e-8)


def numeric_grad(fn: Callable[[], Tensor], param: Tensor, index: tuple[int, ...], h: float) -> float:
    old = param.data[index]
    try:
        param.data[index] = old + h
        up = fn().item()
        param.data[index] = old - h
        down = fn().item()
    finally:
        param.data[index] = old
    return (up - down) / (2.0 * h)


def analytic_grads(fn: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    with Tape() as tape:
        loss = fn()
    grads = tape.backward(loss)
    return [grads.get(p, np.zeros_like(p.data)) for p in params]


def grad_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    n_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` must be deterministic (dropout off). With ``n_coords`` set, that
    many coordinates are sampled uniformly over all parameter entries;
    otherwise every coordinate is checked.
    """
    params = list(params)
    grads = analytic_grads(fn, params)
    coords = [(i, idx) for i, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if n_coords is not None and n_coords < len(coords):
        rng = np.random.default_rng(seed)
        coords = [coords[j] for j in rng.choice(len(coords), size=n_coords, replace=False)]
    worst = 0.0
    for i, idx in coords:
        num = numeric_grad(fn, params[i], idx, h)
        worst = max(worst, float(relative_error(grads[i][idx], num)))
    return worst
