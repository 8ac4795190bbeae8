"""NumPy implementations of the row-wise kernels (fallback backend)."""

import math

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def layer_norm_fwd(x, gamma, beta, eps):
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    return xhat * gamma + beta, xhat, rstd[:, 0]


def layer_norm_bwd(g, xhat, rstd, gamma):
    dgamma = (g * xhat).sum(axis=0)
    dbeta = g.sum(axis=0)
    dxhat = g * gamma
    proj = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = (dxhat - dxhat.mean(axis=1, keepdims=True) - xhat * proj) * rstd[:, None]
    return dx, dgamma, dbeta


def softmax_fwd(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(y, g):
    return y * (g - (g * y).sum(axis=1, keepdims=True))


def gelu_fwd(x):
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x * x * x)))


def gelu_bwd(x, g):
    t = np.tanh(_GELU_C * (x + _GELU_A * x * x * x))
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def scatter_add_rows(out, ids, g):
    np.add.at(out, ids, g)


def _rowdot(a, v):
    # accumulate column by column so every row sums in the same order as the
    # compiled kernel; BLAS may round identical rows differently
    acc = np.zeros(a.shape[0])
    for j in range(a.shape[1]):
        acc += a[:, j] * v[j]
    return acc


def mmr_greedy(cands, query, lam, n):
    m = cands.shape[0]
    norms = np.sqrt(_rowdot(cands * cands, np.ones(cands.shape[1])))
    qn = math.sqrt(float(_rowdot(query[None, :] * query[None, :], np.ones(query.shape[0]))[0]))
    safe = np.where(norms == 0.0, 1.0, norms)
    if qn == 0.0:
        rel = np.zeros(m)
    else:
        rel = _rowdot(cands, query) / (safe * qn)
        rel[norms == 0.0] = 0.0
    n = min(n, m)
    selected = [int(np.argmax(rel))]
    chosen = np.zeros(m, dtype=bool)
    chosen[selected[0]] = True
    redundancy = np.full(m, -np.inf)
    while len(selected) < n:
        last = selected[-1]
        if norms[last] == 0.0:
            sim = np.zeros(m)
        else:
            sim = _rowdot(cands, cands[last]) / (safe * norms[last])
            sim[norms == 0.0] = 0.0
        np.maximum(redundancy, sim, out=redundancy)
        score = lam * rel - (1.0 - lam) * redundancy
        score[chosen] = -np.inf
        j = int(np.argmax(score))
        selected.append(j)
        chosen[j] = True
    return selected
