"""Hot loops for the shipped benchmarks.

Each kernel exists twice: a scalar-loop version compiled with numba, and a
vectorized numpy version used when numba is missing or disabled through
``SMDRATE_DISABLE_NUMBA=1``. Both consume identical pre-drawn samples, so the
two backends agree to rounding (the dot products are summed in a different
order).

The SMD kernels return every iterate x_0..x_N as an (N+1, n) array plus the
dual norm of each oracle output.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, maybe_njit


def _select(loop_fn, numpy_fn):
    if USE_NUMBA:
        return maybe_njit(loop_fn)
    return numpy_fn


# ------------------------------------------------------------------ helpers


def _soft_inplace(x, t):
    for j in range(x.shape[0]):
        v = x[j]
        if v > t:
            x[j] = v - t
        elif v < -t:
            x[j] = v + t
        else:
            x[j] = 0.0


def _interior_inplace(x, eps):
    low = False
    for j in range(x.shape[0]):
        if x[j] < eps:
            low = True
    if low:
        s = 0.0
        for j in range(x.shape[0]):
            if x[j] < eps:
                x[j] = eps
            s += x[j]
        for j in range(x.shape[0]):
            x[j] /= s


if USE_NUMBA:
    _soft_inplace = maybe_njit(_soft_inplace)
    _interior_inplace = maybe_njit(_interior_inplace)


def _np_interior(x, eps):
    if np.any(x < eps):
        x = np.maximum(x, eps)
        x = x / x.sum()
    return x


# ------------------------------------------- phase retrieval, Euclidean ball


def _pr_smd_euclid_loop(A, b, x0, alphas, idx, radius, l1):
    N = alphas.shape[0]
    n = x0.shape[0]
    X = np.empty((N + 1, n))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    for t in range(N):
        i = idx[t]
        u = 0.0
        for j in range(n):
            u += A[i, j] * x[j]
        res = u * u - b[i]
        s = 0.0
        if res > 0:
            s = 1.0
        elif res < 0:
            s = -1.0
        coef = s * 2.0 * u
        gn = 0.0
        a = alphas[t]
        for j in range(n):
            gj = coef * A[i, j]
            gn += gj * gj
            x[j] = x[j] - a * gj
        gnorm[t] = math.sqrt(gn)
        if l1 > 0.0:
            _soft_inplace(x, a * l1)
        if radius < np.inf:
            nx = 0.0
            for j in range(n):
                nx += x[j] * x[j]
            nx = math.sqrt(nx)
            if nx > radius:
                for j in range(n):
                    x[j] *= radius / nx
        X[t + 1] = x
    return X, gnorm


def _pr_smd_euclid_np(A, b, x0, alphas, idx, radius, l1):
    N = alphas.shape[0]
    X = np.empty((N + 1, x0.shape[0]))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    for t in range(N):
        a_i = A[idx[t]]
        u = float(a_i @ x)
        g = np.sign(u * u - b[idx[t]]) * 2.0 * u * a_i
        gnorm[t] = math.sqrt(float(g @ g))
        x = x - alphas[t] * g
        if l1 > 0.0:
            x = np.sign(x) * np.maximum(np.abs(x) - alphas[t] * l1, 0.0)
        nx = math.sqrt(float(x @ x))
        if nx > radius:
            x = x * (radius / nx)
        X[t + 1] = x
    return X, gnorm


pr_smd_euclid = _select(_pr_smd_euclid_loop, _pr_smd_euclid_np)


# ------------------------------------------- phase retrieval, entropy simplex


def _pr_smd_entropy_loop(A, b, x0, alphas, idx, eps):
    N = alphas.shape[0]
    n = x0.shape[0]
    X = np.empty((N + 1, n))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    g = np.empty(n)
    for t in range(N):
        i = idx[t]
        u = 0.0
        for j in range(n):
            u += A[i, j] * x[j]
        res = u * u - b[i]
        s = 0.0
        if res > 0:
            s = 1.0
        elif res < 0:
            s = -1.0
        coef = s * 2.0 * u
        gmax = 0.0
        smax = -np.inf
        a = alphas[t]
        for j in range(n):
            g[j] = coef * A[i, j]
            if abs(g[j]) > gmax:
                gmax = abs(g[j])
            if -a * g[j] > smax:
                smax = -a * g[j]
        gnorm[t] = gmax
        tot = 0.0
        for j in range(n):
            x[j] = x[j] * math.exp(-a * g[j] - smax)
            tot += x[j]
        for j in range(n):
            x[j] /= tot
        _interior_inplace(x, eps)
        X[t + 1] = x
    return X, gnorm


def _pr_smd_entropy_np(A, b, x0, alphas, idx, eps):
    N = alphas.shape[0]
    X = np.empty((N + 1, x0.shape[0]))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    for t in range(N):
        a_i = A[idx[t]]
        u = float(a_i @ x)
        g = np.sign(u * u - b[idx[t]]) * 2.0 * u * a_i
        gnorm[t] = float(np.max(np.abs(g)))
        s = -alphas[t] * g
        w = x * np.exp(s - s.max())
        x = _np_interior(w / w.sum(), eps)
        X[t + 1] = x
    return X, gnorm


pr_smd_entropy = _select(_pr_smd_entropy_loop, _pr_smd_entropy_np)


# ------------------------------------------ Cauchy regression, Euclidean box


def _cauchy_smd_box_loop(A, b, x0, alphas, idx, lower, upper, l1):
    N = alphas.shape[0]
    n = x0.shape[0]
    X = np.empty((N + 1, n))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    for t in range(N):
        i = idx[t]
        r = -b[i]
        for j in range(n):
            r += A[i, j] * x[j]
        coef = 2.0 * r / (1.0 + r * r)
        gn = 0.0
        a = alphas[t]
        for j in range(n):
            gj = coef * A[i, j]
            gn += gj * gj
            x[j] = x[j] - a * gj
        gnorm[t] = math.sqrt(gn)
        if l1 > 0.0:
            _soft_inplace(x, a * l1)
        for j in range(n):
            if x[j] < lower[j]:
                x[j] = lower[j]
            elif x[j] > upper[j]:
                x[j] = upper[j]
        X[t + 1] = x
    return X, gnorm


def _cauchy_smd_box_np(A, b, x0, alphas, idx, lower, upper, l1):
    N = alphas.shape[0]
    X = np.empty((N + 1, x0.shape[0]))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    for t in range(N):
        a_i = A[idx[t]]
        r = float(a_i @ x) - b[idx[t]]
        g = (2.0 * r / (1.0 + r * r)) * a_i
        gnorm[t] = math.sqrt(float(g @ g))
        x = x - alphas[t] * g
        if l1 > 0.0:
            x = np.sign(x) * np.maximum(np.abs(x) - alphas[t] * l1, 0.0)
        x = np.clip(x, lower, upper)
        X[t + 1] = x
    return X, gnorm


cauchy_smd_box = _select(_cauchy_smd_box_loop, _cauchy_smd_box_np)


# ------------------------------------------------ entropy toy, simplex


def _toy_smd_loop(c, sigma, x0, alphas, signs, eps):
    N = alphas.shape[0]
    n = x0.shape[0]
    X = np.empty((N + 1, n))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    g = np.empty(n)
    for t in range(N):
        a = alphas[t]
        gmax = 0.0
        smax = -np.inf
        for j in range(n):
            g[j] = -math.log(x[j]) - 1.0 + c[j] + sigma * signs[t, j]
            if abs(g[j]) > gmax:
                gmax = abs(g[j])
            if -a * g[j] > smax:
                smax = -a * g[j]
        gnorm[t] = gmax
        tot = 0.0
        for j in range(n):
            x[j] = x[j] * math.exp(-a * g[j] - smax)
            tot += x[j]
        for j in range(n):
            x[j] /= tot
        _interior_inplace(x, eps)
        X[t + 1] = x
    return X, gnorm


def _toy_smd_np(c, sigma, x0, alphas, signs, eps):
    N = alphas.shape[0]
    X = np.empty((N + 1, x0.shape[0]))
    gnorm = np.empty(N)
    x = x0.copy()
    X[0] = x
    for t in range(N):
        g = -np.log(x) - 1.0 + c + sigma * signs[t]
        gnorm[t] = float(np.max(np.abs(g)))
        s = -alphas[t] * g
        w = x * np.exp(s - s.max())
        x = _np_interior(w / w.sum(), eps)
        X[t + 1] = x
    return X, gnorm


toy_smd = _select(_toy_smd_loop, _toy_smd_np)


# ------------------------------------------------ batched objective values


def _abs_quad_values_loop(A, b, P):
    """mean_i |(a_i . p)^2 - b_i| for every row p of P."""
    K = P.shape[0]
    m, n = A.shape
    out = np.empty(K)
    for k in range(K):
        acc = 0.0
        for i in range(m):
            u = 0.0
            for j in range(n):
                u += A[i, j] * P[k, j]
            acc += abs(u * u - b[i])
        out[k] = acc / m
    return out


def _abs_quad_values_np(A, b, P):
    out = np.empty(P.shape[0])
    chunk = max(1, 2_000_000 // max(1, A.shape[0]))
    for s in range(0, P.shape[0], chunk):
        U = P[s:s + chunk] @ A.T
        out[s:s + chunk] = np.abs(U * U - b).mean(axis=1)
    return out


abs_quad_values = _select(_abs_quad_values_loop, _abs_quad_values_np)
