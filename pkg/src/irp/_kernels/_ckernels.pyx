# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row-wise kernels. Same signatures as ``_pykernels``."""

import numpy as np

from libc.math cimport exp, sqrt, INFINITY

cdef double GELU_C = 0.7978845608028654  # sqrt(2 / pi)
cdef double GELU_A = 0.044715


def layer_norm_fwd(const double[:, ::1] x, const double[::1] gamma, const double[::1] beta, double eps):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    cdef double mu, var, r, c
    out_arr = np.empty((n, d))
    xhat_arr = np.empty((n, d))
    rstd_arr = np.empty(n)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[::1] rstd = rstd_arr
    with nogil:
        for i in range(n):
            mu = 0.0
            for j in range(d):
                mu += x[i, j]
            mu /= d
            var = 0.0
            for j in range(d):
                c = x[i, j] - mu
                var += c * c
            var /= d
            r = 1.0 / sqrt(var + eps)
            rstd[i] = r
            for j in range(d):
                c = (x[i, j] - mu) * r
                xhat[i, j] = c
                out[i, j] = c * gamma[j] + beta[j]
    return out_arr, xhat_arr, rstd_arr


def layer_norm_bwd(const double[:, ::1] g, const double[:, ::1] xhat, const double[::1] rstd, const double[::1] gamma):
    cdef Py_ssize_t n = g.shape[0], d = g.shape[1], i, j
    cdef double s1, s2, dxh
    dx_arr = np.empty((n, d))
    dgamma_arr = np.zeros(d)
    dbeta_arr = np.zeros(d)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dgamma = dgamma_arr
    cdef double[::1] dbeta = dbeta_arr
    with nogil:
        for i in range(n):
            s1 = 0.0
            s2 = 0.0
            for j in range(d):
                dgamma[j] += g[i, j] * xhat[i, j]
                dbeta[j] += g[i, j]
                dxh = g[i, j] * gamma[j]
                s1 += dxh
                s2 += dxh * xhat[i, j]
            s1 /= d
            s2 /= d
            for j in range(d):
                dx[i, j] = (g[i, j] * gamma[j] - s1 - xhat[i, j] * s2) * rstd[i]
    return dx_arr, dgamma_arr, dbeta_arr


def softmax_fwd(const double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    cdef double m, s, e
    y_arr = np.empty((n, d))
    cdef double[:, ::1] y = y_arr
    with nogil:
        for i in range(n):
            m = x[i, 0]
            for j in range(1, d):
                if x[i, j] > m:
                    m = x[i, j]
            s = 0.0
            for j in range(d):
                e = exp(x[i, j] - m)
                y[i, j] = e
                s += e
            for j in range(d):
                y[i, j] = y[i, j] / s
    return y_arr


def softmax_bwd(const double[:, ::1] y, const double[:, ::1] g):
    cdef Py_ssize_t n = y.shape[0], d = y.shape[1], i, j
    cdef double s
    dx_arr = np.empty((n, d))
    cdef double[:, ::1] dx = dx_arr
    with nogil:
        for i in range(n):
            s = 0.0
            for j in range(d):
                s += g[i, j] * y[i, j]
            for j in range(d):
                dx[i, j] = y[i, j] * (g[i, j] - s)
    return dx_arr


cdef inline double _tanh(double u) noexcept nogil:
    # glibc tanh is several times slower than exp
    return 1.0 - 2.0 / (1.0 + exp(2.0 * u))


def _gelu_fwd_flat(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v
    y_arr = np.empty(n)
    cdef double[::1] y = y_arr
    with nogil:
        for i in range(n):
            v = x[i]
            y[i] = 0.5 * v * (1.0 + _tanh(GELU_C * (v + GELU_A * v * v * v)))
    return y_arr


def _gelu_bwd_flat(const double[::1] x, const double[::1] g):
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v, t
    dx_arr = np.empty(n)
    cdef double[::1] dx = dx_arr
    with nogil:
        for i in range(n):
            v = x[i]
            t = _tanh(GELU_C * (v + GELU_A * v * v * v))
            dx[i] = g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * v * v))
    return dx_arr


def gelu_fwd(x):
    x = np.ascontiguousarray(x)
    return _gelu_fwd_flat(x.reshape(-1)).reshape(x.shape)


def gelu_bwd(x, g):
    x = np.ascontiguousarray(x)
    g = np.ascontiguousarray(g)
    return _gelu_bwd_flat(x.reshape(-1), g.reshape(-1)).reshape(x.shape)


def scatter_add_rows(double[:, ::1] out, const long long[::1] ids, const double[:, ::1] g):
    cdef Py_ssize_t n = g.shape[0], d = g.shape[1], i, j, r
    with nogil:
        for i in range(n):
            r = ids[i]
            for j in range(d):
                out[r, j] += g[i, j]
    return None


cdef double _dot(const double[:, ::1] a, Py_ssize_t i, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0
    for j in range(a.shape[1]):
        s += a[i, j] * b[j]
    return s


cdef double _dot_rows(const double[:, ::1] a, Py_ssize_t i, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0
    for j in range(a.shape[1]):
        s += a[i, j] * a[k, j]
    return s


def mmr_greedy(const double[:, ::1] cands, const double[::1] query, double lam, Py_ssize_t n):
    cdef Py_ssize_t m = cands.shape[0], i, best, last
    cdef double qn, s, score, best_score
    norms_arr = np.empty(m)
    rel_arr = np.zeros(m)
    red_arr = np.full(m, -INFINITY)
    chosen_arr = np.zeros(m, dtype=np.uint8)
    cdef double[::1] norms = norms_arr
    cdef double[::1] rel = rel_arr
    cdef double[::1] red = red_arr
    cdef unsigned char[::1] chosen = chosen_arr
    if n > m:
        n = m
    selected = []
    with nogil:
        qn = sqrt(_dot_rows_q(query))
        for i in range(m):
            norms[i] = sqrt(_dot_rows(cands, i, i))
            if qn != 0.0 and norms[i] != 0.0:
                rel[i] = _dot(cands, i, query) / (norms[i] * qn)
        best = 0
        for i in range(1, m):
            if rel[i] > rel[best]:
                best = i
    chosen[best] = 1
    selected.append(best)
    while len(selected) < n:
        last = best
        with nogil:
            best = -1
            best_score = -INFINITY
            for i in range(m):
                if chosen[i]:
                    continue
                if norms[i] != 0.0 and norms[last] != 0.0:
                    s = _dot_rows(cands, i, last) / (norms[i] * norms[last])
                else:
                    s = 0.0
                if s > red[i]:
                    red[i] = s
                score = lam * rel[i] - (1.0 - lam) * red[i]
                if best < 0 or score > best_score:
                    best = i
                    best_score = score
        chosen[best] = 1
        selected.append(best)
    return selected


cdef double _dot_rows_q(const double[::1] q) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0
    for j in range(q.shape[0]):
        s += q[j] * q[j]
    return s
