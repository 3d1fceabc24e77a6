"""Compiled step loops: numba backend.

Mirrors _loops_np signature for signature.  The scalar coefficient
function is njit-wrapped from the same source the fallback uses, so both
backends implement identical branch structure; floating-point results
still differ in final ulps because summation orders differ (BLAS matvecs
in the fallback vs scalar loops here).
"""

import math

import numpy as np
from numba import njit

from .losses import _grad_coef_scalar

NAME = "numba"

_INF = np.inf

_coef = njit(cache=True)(_grad_coef_scalar)


@njit(cache=True)
def _project(theta, radius):
    if radius == _INF:
        return
    p = theta.shape[0]
    while True:
        s = 0.0
        for j in range(p):
            s += theta[j] * theta[j]
        nrm = math.sqrt(s)
        if nrm <= radius:
            return
        scale = radius / nrm
        for j in range(p):
            theta[j] *= scale


@njit(cache=True)
def sgd_steps(X, y, kind, t0, theta, idx, eta, radius):
    p = X.shape[1]
    for s in range(idx.shape[0]):
        i = idx[s]
        u = 0.0
        for j in range(p):
            u += X[i, j] * theta[j]
        c = eta * _coef(kind, t0, u, y[i])
        for j in range(p):
            theta[j] -= c * X[i, j]
        _project(theta, radius)
    return idx.shape[0]


@njit(cache=True)
def svrg_steps(X, y, kind, t0, theta, snap_coefs, snap_grad, idx, eta, radius, capture_at, capture_out):
    p = X.shape[1]
    for s in range(idx.shape[0]):
        if s == capture_at:
            for j in range(p):
                capture_out[j] = theta[j]
        i = idx[s]
        u = 0.0
        for j in range(p):
            u += X[i, j] * theta[j]
        c = _coef(kind, t0, u, y[i]) - snap_coefs[i]
        for j in range(p):
            theta[j] -= eta * (c * X[i, j] + snap_grad[j])
        _project(theta, radius)
    return idx.shape[0]


@njit(cache=True)
def saga_steps(X, y, kind, t0, theta, table, g, I, J, eta, radius, capture_at, capture_out):
    n = X.shape[0]
    p = X.shape[1]
    steps = I.shape[0]
    b = I.shape[1]
    v = np.empty(p)
    cJ = np.empty(b)
    for s in range(steps):
        if s == capture_at:
            for j in range(p):
                capture_out[j] = theta[j]
        for j in range(p):
            v[j] = g[j]
        for t in range(b):
            i = I[s, t]
            u = 0.0
            for j in range(p):
                u += X[i, j] * theta[j]
            d = (_coef(kind, t0, u, y[i]) - table[i]) / b
            for j in range(p):
                v[j] += d * X[i, j]
        # refresh coefficients are taken at the pre-step iterate
        for t in range(b):
            i = J[s, t]
            u = 0.0
            for j in range(p):
                u += X[i, j] * theta[j]
            cJ[t] = _coef(kind, t0, u, y[i])
        for j in range(p):
            theta[j] -= eta * v[j]
        _project(theta, radius)
        for t in range(b):
            i = J[s, t]
            d = (table[i] - cJ[t]) / n
            for j in range(p):
                g[j] -= d * X[i, j]
            table[i] = cJ[t]
    return 2 * b * steps


def warmup():
    """Compile every kernel on a toy problem so first real use is fast."""
    X = np.ascontiguousarray(np.eye(2))
    X.setflags(write=False)
    y = np.array([0.0, 1.0])
    y.setflags(write=False)
    idx = np.zeros(1, dtype=np.int64)
    cap = np.empty(2)
    for kind in (0, 1):
        # argument mutability matches the real call sites (X, y readonly;
        # everything else writable) so no second compile happens later
        theta = np.zeros(2)
        sgd_steps(X, y, kind, 4.0, theta, idx, 0.0, _INF)
        svrg_steps(X, y, kind, 4.0, theta, y.copy(), theta.copy(), idx, 0.0, _INF, 0, cap)
        saga_steps(
            X, y, kind, 4.0, theta, y.copy(), theta.copy(),
            np.ascontiguousarray(idx[:, None]), np.ascontiguousarray(idx[:, None]),
            0.0, _INF, 0, cap,
        )
