"""Synthetic problem generator.

Gaussian features with a covariance of prescribed condition number, a
random sign-pattern ground truth on the unit sphere, and targets from
either the sigmoid-Bernoulli model or a linear model with heavy-tailed
two-component Gaussian noise.  Everything is seeded explicitly; the same
seeds always reproduce the same problem bit for bit.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._util import derived_seed
from .losses import CLASSIFICATION, REGRESSION, DataSet, _sigmoid_vec


@dataclass(frozen=True)
class CovarianceSpec:
    """Feature covariance: eigenvalues log-spaced from scale to
    scale * cond_ratio, optionally conjugated by a random rotation."""

    p: int
    cond_ratio: float = 1.0
    scale: float = 1.0
    rotate: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"dimension must be >= 1, got {self.p}")
        if not (self.cond_ratio >= 1.0) or not math.isfinite(self.cond_ratio):
            raise ValueError(f"condition ratio must be >= 1, got {self.cond_ratio!r}")
        if not (self.scale > 0.0) or not math.isfinite(self.scale):
            raise ValueError(f"scale must be positive, got {self.scale!r}")
        if self.p == 1 and self.cond_ratio != 1.0:
            raise ValueError("a 1-d covariance cannot have condition ratio > 1")


@dataclass(frozen=True)
class NoiseSpec:
    """Two-component regression noise: N(0,1) with probability 1 - delta,
    N(0, sigma^2) with probability delta."""

    delta: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.delta <= 1.0):
            raise ValueError(f"mixture weight must be in [0, 1], got {self.delta!r}")
        if not (self.sigma >= 0.0) or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be nonnegative, got {self.sigma!r}")


def make_covariance(spec):
    """Dense covariance matrix for the given spec.

    cond_ratio == 1 returns scale * I exactly.  With rotate, a Haar
    orthogonal matrix (QR of a Gaussian, signs fixed from R's diagonal)
    conjugates the log-spaced spectrum; the result is symmetrized so it is
    exactly equal to its transpose.
    """
    if spec.cond_ratio == 1.0:
        eigs = np.full(spec.p, spec.scale)
    else:
        eigs = np.logspace(
            math.log10(spec.scale), math.log10(spec.scale * spec.cond_ratio), spec.p
        )
    if not spec.rotate:
        return np.diag(eigs)
    rng = np.random.default_rng(spec.seed)
    A = rng.standard_normal((spec.p, spec.p))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    C = (Q * eigs) @ Q.T
    return (C + C.T) / 2.0


def sample_theta_star(p, seed):
    """Ground truth: i.i.d. fair coin flips in {0,1}^p, normalized to unit
    length; the all-zero draw is rejected and redrawn."""
    if p < 1:
        raise ValueError(f"dimension must be >= 1, got {p}")
    rng = np.random.default_rng(seed)
    while True:
        bits = rng.integers(0, 2, size=p).astype(float)
        if bits.any():
            return bits / np.linalg.norm(bits)


def sample_features(n, cov, seed):
    """n Gaussian rows with the given covariance (via its Cholesky factor)."""
    if n < 1:
        raise ValueError(f"need at least one row, got n={n}")
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    L = np.linalg.cholesky(cov)  # raises LinAlgError if not positive definite
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, cov.shape[0])) @ L.T


def label_binary(features, theta_star, seed):
    """Bernoulli targets in {0, 1} with success probability sigma(<theta*, x>)."""
    X = np.asarray(features, dtype=float)
    probs = _sigmoid_vec(X @ np.asarray(theta_star, dtype=float))
    rng = np.random.default_rng(seed)
    return (rng.random(X.shape[0]) < probs).astype(float)


def label_regression(features, theta_star, noise, seed):
    """Linear targets <theta*, x> plus two-component Gaussian noise; each
    row picks the wide component independently with probability delta."""
    X = np.asarray(features, dtype=float)
    rng = np.random.default_rng(seed)
    wide = rng.random(X.shape[0]) < noise.delta
    eps = rng.standard_normal(X.shape[0]) * np.where(wide, noise.sigma, 1.0)
    return X @ np.asarray(theta_star, dtype=float) + eps


def synthetic_dataset(family, n, cov_spec, seed, noise=None):
    """Full problem instance: (DataSet, theta_star).

    Sub-seeds for rotation, ground truth, features and labels are derived
    from one base seed, so a single integer pins the whole instance.  The
    dataset's meta records every derived seed.
    """
    if family not in (CLASSIFICATION, REGRESSION):
        raise ValueError(f"unknown family {family!r}")
    ss = derived_seed(seed, "synthetic").generate_state(4)
    cov_spec = CovarianceSpec(
        p=cov_spec.p,
        cond_ratio=cov_spec.cond_ratio,
        scale=cov_spec.scale,
        rotate=cov_spec.rotate,
        seed=int(ss[0]),
    )
    cov = make_covariance(cov_spec)
    theta_star = sample_theta_star(cov_spec.p, int(ss[1]))
    X = sample_features(n, cov, int(ss[2]))
    if family == CLASSIFICATION:
        y = label_binary(X, theta_star, int(ss[3]))
    else:
        noise = noise if noise is not None else NoiseSpec()
        y = label_regression(X, theta_star, noise, int(ss[3]))
    meta = {
        "source": "synthetic",
        "family": family,
        "base_seed": int(seed),
        "cov": {
            "p": cov_spec.p,
            "cond_ratio": cov_spec.cond_ratio,
            "scale": cov_spec.scale,
            "rotate": cov_spec.rotate,
            "seed": int(ss[0]),
        },
        "theta_seed": int(ss[1]),
        "feature_seed": int(ss[2]),
        "label_seed": int(ss[3]),
    }
    if family == REGRESSION:
        meta["noise"] = {"delta": noise.delta, "sigma": noise.sigma}
    return DataSet(X, y, meta), theta_star
