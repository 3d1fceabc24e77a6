"""Pure-numpy step loops: the fallback backend.

Same signatures as the compiled module.  Each `*_steps` function advances
theta in place through a block of steps and returns the number of
per-sample gradient evaluations it spent.  `capture_at` (an offset into
this block, or -1) copies the pre-step iterate of that step into
`capture_out`; optimizers use it to realize a uniformly random iterate
without storing the whole trajectory.
"""

import numpy as np

from .losses import _grad_coef_scalar, _grad_coefs

NAME = "numpy"


def project_inplace(theta, radius):
    if not np.isfinite(radius):
        return
    # loop so the scaled point is never left outside by a rounding ulp
    nrm = float(np.linalg.norm(theta))
    while nrm > radius:
        theta *= radius / nrm
        nrm = float(np.linalg.norm(theta))


def sgd_steps(X, y, kind, t0, theta, idx, eta, radius):
    for i in idx:
        u = float(X[i] @ theta)
        c = _grad_coef_scalar(kind, t0, u, y[i])
        theta -= (eta * c) * X[i]
        project_inplace(theta, radius)
    return idx.shape[0]


def svrg_steps(X, y, kind, t0, theta, snap_coefs, snap_grad, idx, eta, radius, capture_at, capture_out):
    for s in range(idx.shape[0]):
        if s == capture_at:
            capture_out[:] = theta
        i = idx[s]
        u = float(X[i] @ theta)
        c = _grad_coef_scalar(kind, t0, u, y[i]) - snap_coefs[i]
        theta -= eta * (c * X[i] + snap_grad)
        project_inplace(theta, radius)
    return idx.shape[0]


def saga_one_step(X, y, kind, t0, theta, table, g, I, J, eta, radius):
    """One minibatch step of the table-based estimator.

    Direction uses the fresh minibatch I against the stored anchor
    coefficients; the refresh batch J updates table entries and the running
    table mean g at the pre-step iterate.  Per-sample gradients stored as
    scalar coefficients keep the table O(n) instead of O(np).
    """
    n = X.shape[0]
    b = I.shape[0]
    cI = _grad_coefs(kind, t0, X[I] @ theta, y[I])
    v = X[I].T @ (cI - table[I]) / b + g
    uJ = X[J] @ theta
    theta -= eta * v
    project_inplace(theta, radius)
    cJ = _grad_coefs(kind, t0, uJ, y[J])
    g -= X[J].T @ (table[J] - cJ) / n
    table[J] = cJ
    return 2 * b


def saga_steps(X, y, kind, t0, theta, table, g, I, J, eta, radius, capture_at, capture_out):
    evals = 0
    for s in range(I.shape[0]):
        if s == capture_at:
            capture_out[:] = theta
        evals += saga_one_step(X, y, kind, t0, theta, table, g, I[s], J[s], eta, radius)
    return evals
