"""Landscape diagnostics: how far the empirical objective sits from its
population counterpart, and how benign the population landscape is near
the ground truth.

The population objective is never available in closed form here, so a
PopulationOracle stands in for it: one large Monte Carlo draw from the
generating distribution, shared across all probe points.  Quantities of
interest:

  * sup over a probe grid of ||empirical grad - population grad||
    (uniform gradient deviation over a ball);
  * the same for Hessians in operator norm;
  * mu0: the worst directional alignment <theta - theta*, grad R(theta)>
    / ||theta - theta*||^2 over probes, positive when gradients point
    away from the ground truth in a one-point-convexity sense;
  * kappa0: the smallest population Hessian eigenvalue over a small ball
    around theta*, positive when the landscape is locally convex there.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._util import uniform_ball
from .datagen import label_binary, label_regression, make_covariance, sample_features
from .losses import (
    CLASSIFICATION,
    REGRESSION,
    DataSet,
    batch_gradient,
    batch_hessian,
    batch_objective,
)

# an oracle draw should dwarf the empirical sample it judges
MIN_ORACLE_FACTOR = 10


@dataclass(frozen=True)
class ProbeGrid:
    """Deterministic probe set: for each radius, `directions` points at
    that distance from the center, directions drawn once per radius from
    the grid's own seed."""

    radii: tuple
    directions: int = 8
    seed: int = 0

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise ValueError("need at least one probe radius")
        for r in radii:
            if not (r > 0.0) or not math.isfinite(r):
                raise ValueError(f"probe radii must be positive and finite, got {r!r}")
        if self.directions < 1:
            raise ValueError("need at least one direction per radius")
        object.__setattr__(self, "radii", radii)

    def points(self, p, center=None):
        """(len(radii) * directions, p) array of probe points."""
        rng = np.random.default_rng(self.seed)
        out = []
        for r in self.radii:
            d = rng.standard_normal((self.directions, p))
            nrm = np.linalg.norm(d, axis=1, keepdims=True)
            nrm[nrm == 0.0] = 1.0
            out.append(r * d / nrm)
        pts = np.vstack(out)
        if center is not None:
            pts = pts + np.asarray(center, dtype=float)
        return pts


@dataclass(frozen=True)
class PopulationOracle:
    """Monte Carlo population stand-in: a large draw from the generating
    distribution, with the ground truth it was generated from."""

    data: DataSet
    theta_star: np.ndarray

    def __post_init__(self):
        ts = np.ascontiguousarray(self.theta_star, dtype=float)
        if ts.shape != (self.data.p,):
            raise ValueError(
                f"ground truth has shape {ts.shape}, expected ({self.data.p},)"
            )
        ts.setflags(write=False)
        object.__setattr__(self, "theta_star", ts)

    @property
    def n_pop(self):
        return self.data.n

    @classmethod
    def draw(cls, family, cov, theta_star, n_pop, seed, noise=None, cutoff=None):
        """Fresh oracle draw with a given ground truth.

        cov is a dense covariance matrix; targets follow the family's
        generating model.  `cutoff` is unused for generation and accepted
        only so call sites can treat families uniformly.
        """
        del cutoff
        X = sample_features(n_pop, cov, seed)
        if family == CLASSIFICATION:
            y = label_binary(X, theta_star, seed + 1)
        elif family == REGRESSION:
            if noise is None:
                raise ValueError("regression oracle needs a noise spec")
            y = label_regression(X, theta_star, noise, seed + 1)
        else:
            raise ValueError(f"unknown family {family!r}")
        return cls(DataSet(X, y, {"source": "population-mc", "seed": int(seed)}), theta_star)


def _check_oracle_size(oracle, data):
    if oracle.n_pop < MIN_ORACLE_FACTOR * data.n:
        raise ValueError(
            f"oracle draw of {oracle.n_pop} is too small to judge n={data.n} "
            f"(need at least {MIN_ORACLE_FACTOR}x)"
        )


def population_objective_mc(model, theta, oracle):
    return batch_objective(model, theta, oracle.data)


def population_gradient_mc(model, theta, oracle):
    """Monte Carlo estimate of the population gradient at theta."""
    return batch_gradient(model, theta, oracle.data)


def population_gradient_stderr(model, theta, oracle):
    """Standard error of the MC gradient estimate: sqrt(tr Cov / N).

    Per-sample gradients are coef * x, so E||G||^2 is mean(coef^2 ||x||^2).
    """
    X = oracle.data.features
    c = model.grad_coefs(X @ np.asarray(theta, dtype=float), oracle.data.targets)
    xsq = np.einsum("ij,ij->i", X, X)
    msq = float(np.mean(c * c * xsq))
    g = population_gradient_mc(model, theta, oracle)
    var = max(msq - float(g @ g), 0.0)
    return math.sqrt(var / oracle.n_pop)


def population_hessian_mc(model, theta, oracle):
    return batch_hessian(model, theta, oracle.data)


def operator_norm(mat, tol=1e-12, max_iter=5000, seed=0):
    """Largest singular value by power iteration on M^T M.

    Squaring makes the iteration indifferent to eigenvalue signs, which
    matters because deviation matrices routinely have their extreme
    eigenvalue negative.  For the symmetric inputs used here this equals
    the largest absolute eigenvalue.
    """
    M = np.asarray(mat, dtype=float)
    if M.ndim != 2:
        raise ValueError("operator norm needs a matrix")
    rng = np.random.default_rng(seed)
    p = M.shape[1]
    for _ in range(3):
        v = rng.standard_normal(p)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(max_iter):
            w = M.T @ (M @ v)
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                break  # v sits in the null space; restart with a new vector
            new = math.sqrt(float(v @ w))
            v = w / nw
            if abs(new - lam) <= tol * max(new, 1.0):
                return new
            lam = new
        else:
            return lam
    return 0.0


def grad_deviation_sup(model, data, oracle, grid, center=None, return_argmax=False):
    """sup over grid points of ||empirical gradient - population gradient||."""
    _check_oracle_size(oracle, data)
    pts = grid.points(data.p, center)
    best = -1.0
    best_pt = None
    for theta in pts:
        dev = float(
            np.linalg.norm(
                batch_gradient(model, theta, data)
                - population_gradient_mc(model, theta, oracle)
            )
        )
        if dev > best:
            best, best_pt = dev, theta
    if return_argmax:
        return best, best_pt
    return best


def hess_deviation_sup(model, data, oracle, grid, center=None):
    """sup over grid points of the operator norm of the Hessian deviation."""
    _check_oracle_size(oracle, data)
    pts = grid.points(data.p, center)
    best = 0.0
    for theta in pts:
        D = batch_hessian(model, theta, data) - population_hessian_mc(model, theta, oracle)
        best = max(best, operator_norm(D))
    return best


def mu0_estimate(model, oracle, grid):
    """Worst directional alignment around the ground truth:

        min over probes of <theta - theta*, grad R(theta)> / ||theta - theta*||^2

    with the grid centered at theta*.  Positive values certify that
    population gradients point outward from theta* on the probed shells.
    """
    ts = oracle.theta_star
    pts = grid.points(ts.shape[0], center=ts)
    best = math.inf
    used = 0
    for theta in pts:
        d = theta - ts
        dsq = float(d @ d)
        if dsq < 1e-24:
            continue  # the probe collapsed onto theta*; ratio undefined there
        g = population_gradient_mc(model, theta, oracle)
        best = min(best, float(d @ g) / dsq)
        used += 1
    if used == 0:
        raise ValueError("all probe points coincide with the ground truth")
    return best


def kappa0_estimate(model, oracle, epsilon, probes=8, seed=0):
    """Smallest population Hessian eigenvalue over a ball around theta*.

    Probe 0 is theta* itself; the remaining probes-1 points are uniform in
    the epsilon-ball.  With probes=1 this is exactly the eigenvalue floor
    at the ground truth.
    """
    if not (epsilon > 0.0) or not math.isfinite(epsilon):
        raise ValueError(f"ball radius must be positive, got {epsilon!r}")
    if probes < 1:
        raise ValueError("need at least one probe")
    ts = oracle.theta_star
    pts = [ts]
    if probes > 1:
        rng = np.random.default_rng(seed)
        pts.extend(uniform_ball(rng, probes - 1, ts.shape[0], epsilon, center=ts))
    best = math.inf
    for theta in pts:
        H = population_hessian_mc(model, theta, oracle)
        best = min(best, float(np.linalg.eigvalsh(H)[0]))
    return best


@dataclass
class LandscapeReport:
    """Bundle of diagnostics for one problem instance, JSON-serializable."""

    family: str
    n: int | None
    p: int
    n_pop: int
    grad_dev_sup: float | None = None
    grad_dev_stderr: float | None = None
    hess_dev_sup: float | None = None
    mu0_hat: float | None = None
    kappa0_hat: float | None = None
    grid: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "version": __version__,
            "created_unix": time.time(),
            "family": self.family,
            "n": self.n,
            "p": self.p,
            "n_pop": self.n_pop,
            "grad_dev_sup": self.grad_dev_sup,
            "grad_dev_stderr": self.grad_dev_stderr,
            "hess_dev_sup": self.hess_dev_sup,
            "mu0_hat": self.mu0_hat,
            "kappa0_hat": self.kappa0_hat,
            "grid": self.grid,
            "seeds": self.seeds,
            "extra": self.extra,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
