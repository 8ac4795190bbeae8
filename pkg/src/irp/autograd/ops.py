"""Differentiable primitives. Each returns a new :class:`Tensor`."""

from __future__ import annotations

import builtins
from typing import Sequence

import numpy as np

from .. import _kernels
from .tensor import Tensor, active_tape, as_tensor, check_finite

LAYER_NORM_EPS = 1e-5


def _wrap(out: np.ndarray, inputs: Sequence[Tensor], backward, op: str) -> Tensor:
    check_finite(out, op)
    tape = active_tape()
    if tape is not None and builtins.any(t.requires_grad for t in inputs):
        result = Tensor(out, requires_grad=True)
        tape.record(inputs, result, backward)
        return result
    return Tensor(out)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _wrap(out, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _wrap(out, (a, b), backward, "sub")


def multiply(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _wrap(out, (a, b), backward, "multiply")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data  # non-finite results are reported by _wrap

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _wrap(out, (a, b), backward, "div")


def matmul(a, b) -> Tensor:
    """Batched matrix product over the last two axes, with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape) if b.requires_grad else None
        return ga, gb

    return _wrap(out, (a, b), backward, "matmul")


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.transpose(a.data, axes)

    def backward(g):
        return (np.transpose(g, inverse),)

    return _wrap(out, (a,), backward, "transpose")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    src = a.shape
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(src),)

    return _wrap(out, (a,), backward, "reshape")


def select(a: Tensor, key) -> Tensor:
    """Basic (slice/integer) indexing."""
    out = a.data[key]

    def backward(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _wrap(np.array(out), (a,), backward, "select")


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError("embedding id out of range")
    out = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        _kernels.scatter_add_rows(full, np.ascontiguousarray(ids.reshape(-1)), np.ascontiguousarray(g.reshape(-1, table.shape[1])))
        return (full,)

    return _wrap(out, (table,), backward, "embedding_lookup")


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by subtracting the row max."""
    shape = a.shape
    y = _kernels.softmax_fwd(np.ascontiguousarray(a.data.reshape(-1, shape[-1]))).reshape(shape)

    def backward(g):
        d = shape[-1]
        return (_kernels.softmax_bwd(y.reshape(-1, d), np.ascontiguousarray(g).reshape(-1, d)).reshape(shape),)

    return _wrap(y, (a,), backward, "softmax_rows")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    shape = x.shape
    d = shape[-1]
    out, xhat, rstd = _kernels.layer_norm_fwd(np.ascontiguousarray(x.data.reshape(-1, d)), gamma.data, beta.data, eps)

    def backward(g):
        dx, dgamma, dbeta = _kernels.layer_norm_bwd(np.ascontiguousarray(g).reshape(-1, d), xhat, rstd, gamma.data)
        return dx.reshape(shape), dgamma, dbeta

    return _wrap(out.reshape(shape), (x, gamma, beta), backward, "layer_norm")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    out = _kernels.gelu_fwd(x.data)

    def backward(g):
        return (_kernels.gelu_bwd(x.data, g),)

    return _wrap(out, (x,), backward, "gelu")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    z = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _wrap(out, (x,), backward, "sigmoid")


def log(x: Tensor) -> Tensor:
    if (x.data <= 0).any():
        raise FloatingPointError("log of a non-positive value")
    out = np.log(x.data)

    def backward(g):
        return (g / x.data,)

    return _wrap(out, (x,), backward, "log")


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(x.data, lo, hi)

    def backward(g):
        return (g * ((x.data >= lo) & (x.data <= hi)),)

    return _wrap(out, (x,), backward, "clip")


def sum(x: Tensor, axis=None) -> Tensor:  # noqa: A001
    out = np.sum(x.data, axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _wrap(np.asarray(out), (x,), backward, "sum")


def mean(x: Tensor, axis=None) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]
    out = np.mean(x.data, axis=axis)

    def backward(g):
        if axis is None:
            return (np.full(x.shape, float(g) / n),)
        return (np.broadcast_to(np.expand_dims(g, axis) / n, x.shape).copy(),)

    return _wrap(np.asarray(out), (x,), backward, "mean")


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=0)
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def backward(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _wrap(out, parts, backward, "concat_rows")


def dropout(x: Tensor, rate: float, train: bool, seed=None) -> Tensor:
    """Inverted dropout; identity when ``train`` is false or ``rate`` is 0.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not train or rate == 0.0:
        return x
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = x.data * keep

    def backward(g):
        return (g * keep,)

    return _wrap(out, (x,), backward, "dropout")
