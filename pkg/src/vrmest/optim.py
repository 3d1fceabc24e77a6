"""Optimizers for the finite-sum objectives.

Four solvers share one harness contract: batch gradient descent, plain
SGD, an epoch/snapshot variance-reduced method (run_svrg), and a
table-based variance-reduced method (run_saga).  Each returns a
TrainTrace whose rows log (pass, objective, gradient norm, wall ms) along
the running iterate, where one pass means n per-sample gradient
evaluations; diagnostic evaluations for the trace itself are not charged.

Randomness policy: every run consumes a single np.random.default_rng
stream in a documented order, and index blocks are pre-drawn outside the
step kernels.  Hence a (config, data, backend) triple fixes the whole
trajectory exactly, and trace rows only densify (never shift) when the
trace resolution changes.
"""

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import backend
from .errors import DivergenceError
from .losses import CLASSIFICATION, REGRESSION, batch_gradient, batch_objective
from ._loops_np import saga_one_step

OUTPUT_LAST = "last"
OUTPUT_RANDOM = "random"

# tolerance for the optional per-step check that the stored table mean
# still matches the table it summarizes
TABLE_CHECK_TOL = 1e-10


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BallConstraint:
    """Feasible set ||theta|| <= radius; radius None means unconstrained."""

    radius: float | None = None

    def __post_init__(self):
        if self.radius is not None:
            r = float(self.radius)
            if not (r > 0.0) or not math.isfinite(r):
                raise ValueError(f"ball radius must be positive and finite, got {self.radius!r}")
            object.__setattr__(self, "radius", r)

    @classmethod
    def unconstrained(cls):
        return cls(None)

    @classmethod
    def ball(cls, radius):
        return cls(float(radius))

    @property
    def rad(self):
        """Radius as a float, +inf when unconstrained (kernel form)."""
        return np.inf if self.radius is None else self.radius


def _check_common(eta, trace_points_per_pass):
    if not (eta > 0.0) or not math.isfinite(eta):
        raise ValueError(f"step size must be positive and finite, got {eta!r}")
    if trace_points_per_pass < 1:
        raise ValueError("trace resolution must be at least one row per pass")


@dataclass(frozen=True)
class GdConfig:
    """Full-gradient descent; grad_tol > 0 enables early stopping."""

    eta: float
    max_passes: int
    constraint: BallConstraint = field(default_factory=BallConstraint)
    grad_tol: float = 0.0
    trace_points_per_pass: int = 1
    keep_iterates: bool = False

    def __post_init__(self):
        _check_common(self.eta, self.trace_points_per_pass)
        if self.max_passes < 1:
            raise ValueError("need at least one pass")
        if self.grad_tol < 0.0:
            raise ValueError("gradient tolerance must be nonnegative")


@dataclass(frozen=True)
class SgdConfig:
    """Uniform single-sample SGD with a constant step."""

    eta: float
    max_passes: int
    constraint: BallConstraint = field(default_factory=BallConstraint)
    grad_tol: float = 0.0
    seed: int = 0
    trace_points_per_pass: int = 1
    keep_iterates: bool = False

    def __post_init__(self):
        _check_common(self.eta, self.trace_points_per_pass)
        if self.max_passes < 1:
            raise ValueError("need at least one pass")
        if self.grad_tol < 0.0:
            raise ValueError("gradient tolerance must be nonnegative")


@dataclass(frozen=True)
class SvrgConfig:
    """Snapshot variance reduction: epochs of m inner steps, T total inner
    steps, optionally restarted; output is the last iterate or a uniformly
    random inner iterate."""

    eta: float
    m: int
    T: int
    restarts: int = 1
    constraint: BallConstraint = field(default_factory=BallConstraint)
    output_mode: str = OUTPUT_LAST
    seed: int = 0
    trace_points_per_pass: int = 1
    keep_iterates: bool = False

    def __post_init__(self):
        _check_common(self.eta, self.trace_points_per_pass)
        if self.m < 1:
            raise ValueError("epoch length must be >= 1")
        if self.T < self.m:
            raise ValueError(f"total inner steps T={self.T} must cover one epoch m={self.m}")
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.output_mode not in (OUTPUT_LAST, OUTPUT_RANDOM):
            raise ValueError(f"unknown output mode {self.output_mode!r}")

    @property
    def epochs(self):
        return math.ceil(self.T / self.m)


@dataclass(frozen=True)
class SagaConfig:
    """Table-based variance reduction with minibatch size b and K steps
    per restart; debug_check verifies the running table mean every step."""

    eta: float
    b: int
    K: int
    restarts: int = 1
    constraint: BallConstraint = field(default_factory=BallConstraint)
    output_mode: str = OUTPUT_LAST
    seed: int = 0
    trace_points_per_pass: int = 1
    keep_iterates: bool = False
    debug_check: bool = False

    def __post_init__(self):
        _check_common(self.eta, self.trace_points_per_pass)
        if self.b < 1:
            raise ValueError("minibatch size must be >= 1")
        if self.K < 1:
            raise ValueError("need at least one step")
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.output_mode not in (OUTPUT_LAST, OUTPUT_RANDOM):
            raise ValueError(f"unknown output mode {self.output_mode!r}")


# ---------------------------------------------------------------------------
# trace


@dataclass
class TrainTrace:
    """Progress log of one run plus its outcome.

    theta is the solver's declared output (for random output mode this is
    the captured random iterate, not the last row's point).  grad_evals
    counts charged per-sample gradient evaluations; passes = grad_evals/n
    row by row.  wall_ms is measured and therefore not reproducible; all
    other fields are bit-stable given (config, data, backend).
    """

    passes: np.ndarray
    objective: np.ndarray
    grad_norm: np.ndarray
    wall_ms: np.ndarray
    theta: np.ndarray
    grad_evals: int
    config: dict
    backend: str
    iterates: list | None = None

    @property
    def final_objective(self):
        return float(self.objective[-1])

    def best_row(self):
        """(row index, objective) of the lowest recorded objective."""
        i = int(np.argmin(self.objective))
        return i, float(self.objective[i])

    def to_csv(self, path, reference=None, wall_mode="blank"):
        """Write rows as pass,objective,objective_gap,grad_norm,wall_ms.

        The gap column is objective minus `reference`, floored at 1e-16
        for log-scale plotting, or empty when no reference is given.
        wall_mode "blank" leaves the timing column empty so files are
        byte-identical across reruns; "measured" writes real times.
        """
        if wall_mode not in ("blank", "measured"):
            raise ValueError(f"unknown wall mode {wall_mode!r}")
        lines = ["pass,objective,objective_gap,grad_norm,wall_ms\n"]
        for k in range(self.passes.shape[0]):
            gap = ""
            if reference is not None:
                gap = repr(max(float(self.objective[k]) - float(reference), 1e-16))
            wall = repr(float(self.wall_ms[k])) if wall_mode == "measured" else ""
            lines.append(
                f"{float(self.passes[k])!r},{float(self.objective[k])!r},"
                f"{gap},{float(self.grad_norm[k])!r},{wall}\n"
            )
        with open(path, "w") as fh:
            fh.writelines(lines)


class _TraceBuilder:
    def __init__(self, model, data, config_echo, keep_iterates):
        self.model = model
        self.data = data
        self.config_echo = config_echo
        self.rows = []
        self.iterates = [] if keep_iterates else None
        self.evals = 0
        self.start = time.perf_counter()

    def record(self, theta):
        obj = batch_objective(self.model, theta, self.data)
        gn = float(np.linalg.norm(batch_gradient(self.model, theta, self.data)))
        wall = (time.perf_counter() - self.start) * 1e3
        self.rows.append((self.evals / self.data.n, obj, gn, wall))
        if self.iterates is not None:
            self.iterates.append(theta.copy())
        if not (math.isfinite(obj) and math.isfinite(gn)):
            raise DivergenceError(
                f"non-finite objective/gradient after {self.rows[-1][0]:.3f} passes",
                trace=self.build(theta),
            )
        return gn

    def build(self, theta):
        cols = np.array(self.rows, dtype=float).reshape(-1, 4)
        return TrainTrace(
            passes=cols[:, 0],
            objective=cols[:, 1],
            grad_norm=cols[:, 2],
            wall_ms=cols[:, 3],
            theta=np.array(theta, dtype=float),
            grad_evals=self.evals,
            config=self.config_echo,
            backend=backend.name(),
            iterates=self.iterates,
        )


def _config_echo(name, cfg):
    d = asdict(cfg)
    d["algorithm"] = name
    return d


# ---------------------------------------------------------------------------
# shared pieces


def project_ball(theta, constraint):
    """Euclidean projection onto the constraint ball.

    Identity (the same array object) when unconstrained or already
    feasible.  The scaling repeats until the norm is truly <= radius, so
    a rounding ulp can never leave the result infeasible and projecting
    twice equals projecting once bit for bit.
    """
    theta = np.asarray(theta, dtype=float)
    r = np.inf if constraint is None else constraint.rad
    if not np.isfinite(r):
        return theta
    nrm = float(np.linalg.norm(theta))
    if nrm <= r:
        return theta
    out = theta.copy()
    from ._loops_np import project_inplace

    project_inplace(out, r)
    return out


def _init_theta(theta0, p, constraint):
    if theta0 is None:
        return np.zeros(p)
    theta = np.array(theta0, dtype=float)
    if theta.shape != (p,):
        raise ValueError(f"initial point has shape {theta.shape}, expected ({p},)")
    if not np.isfinite(theta).all():
        raise ValueError("initial point contains non-finite values")
    r = constraint.rad
    if np.isfinite(r) and float(np.linalg.norm(theta)) > r:
        raise ValueError("initial point lies outside the constraint ball")
    return theta


def _chunk(n, points_per_pass, samples_per_step):
    """Steps between trace rows: about n / (points_per_pass * cost)."""
    return max(1, int(round(n / (points_per_pass * samples_per_step))))


# ---------------------------------------------------------------------------
# batch GD


def run_batch_gd(model, data, cfg, theta0=None):
    """Projected full-gradient descent.

    Each iteration charges n evaluations (one full gradient); rows land on
    integer passes.  Stops early once the gradient norm reaches grad_tol.
    """
    theta = _init_theta(theta0, data.p, cfg.constraint)
    tb = _TraceBuilder(model, data, _config_echo("gd", cfg), cfg.keep_iterates)
    gn = tb.record(theta)
    for _ in range(cfg.max_passes):
        if cfg.grad_tol > 0.0 and gn <= cfg.grad_tol:
            break
        g = batch_gradient(model, theta, data)
        theta = project_ball(theta - cfg.eta * g, cfg.constraint)
        tb.evals += data.n
        gn = tb.record(theta)
    return tb.build(theta)


# ---------------------------------------------------------------------------
# SGD


def run_sgd(model, data, cfg, theta0=None):
    """Uniform-sampling SGD with a constant step.

    Index draws: one integers(0, n, size=n) block per pass, consumed in
    order, so the trajectory is independent of trace resolution.
    """
    lp = backend.loops()
    X, y = data.features, data.targets
    n = data.n
    theta = _init_theta(theta0, data.p, cfg.constraint).copy()
    radius = cfg.constraint.rad
    rng = np.random.default_rng(cfg.seed)
    tb = _TraceBuilder(model, data, _config_echo("sgd", cfg), cfg.keep_iterates)
    gn = tb.record(theta)
    step = _chunk(n, cfg.trace_points_per_pass, 1)
    for _ in range(cfg.max_passes):
        if cfg.grad_tol > 0.0 and gn <= cfg.grad_tol:
            break
        idx = rng.integers(0, n, size=n)
        done = 0
        while done < n:
            take = min(step, n - done)
            tb.evals += lp.sgd_steps(
                X, y, model.kind_code, model.cutoff, theta, idx[done : done + take],
                cfg.eta, radius,
            )
            done += take
            gn = tb.record(theta)
    return tb.build(theta)


# ---------------------------------------------------------------------------
# SVRG


def svrg_vr_gradient(i, theta, snapshot, snapshot_grad, model, data, check=False):
    """Variance-reduced single-sample direction

        g_i(theta) - g_i(snapshot) + snapshot_grad,

    where g_i is sample i's gradient.  Unbiased over uniform i whenever
    snapshot_grad is the full gradient at the snapshot; check=True
    verifies that precondition (at full-gradient cost) and raises on
    mismatch.
    """
    from .losses import sample_gradient

    s = data.sample(int(i))
    if check:
        full = batch_gradient(model, snapshot, data)
        if not np.allclose(full, snapshot_grad, rtol=1e-9, atol=1e-12):
            raise ValueError("snapshot_grad does not match the full gradient at the snapshot")
    return sample_gradient(model, theta, s) - sample_gradient(model, snapshot, s) + np.asarray(
        snapshot_grad, dtype=float
    )


def run_svrg(model, data, cfg, theta0=None):
    """Restarted snapshot variance reduction.

    Per restart: ceil(T/m) epochs.  An epoch stores the current point,
    evaluates all n per-sample gradients there (charged n; kept as scalar
    coefficients since gradients are coef * x), then runs m inner steps of
    cost 1 each, so an epoch charges exactly n + m.  The next epoch's
    snapshot is the last inner iterate.  Output per restart: the last
    iterate, or one inner iterate chosen uniformly from all T' = epochs*m
    of them; each restart starts from the previous restart's output.

    Draw order per restart: the random-output index first (if any), then
    one integers(0, n, size=m) block per epoch.
    """
    lp = backend.loops()
    X, y = data.features, data.targets
    n, p = data.n, data.p
    theta = _init_theta(theta0, p, cfg.constraint).copy()
    radius = cfg.constraint.rad
    rng = np.random.default_rng(cfg.seed)
    tb = _TraceBuilder(model, data, _config_echo("svrg", cfg), cfg.keep_iterates)
    tb.record(theta)
    epochs = cfg.epochs
    step = _chunk(n, cfg.trace_points_per_pass, 1)
    captured = np.empty(p)
    for _ in range(cfg.restarts):
        pick = -1
        if cfg.output_mode == OUTPUT_RANDOM:
            pick = int(rng.integers(0, epochs * cfg.m))
        base = 0
        for _ in range(epochs):
            scores = X @ theta
            snap_coefs = model.grad_coefs(scores, y)
            snap_grad = X.T @ snap_coefs / n
            tb.evals += n
            idx = rng.integers(0, n, size=cfg.m)
            done = 0
            while done < cfg.m:
                take = min(step, cfg.m - done)
                local = pick - base - done
                cap = local if 0 <= local < take else -1
                tb.evals += lp.svrg_steps(
                    X, y, model.kind_code, model.cutoff, theta, snap_coefs, snap_grad,
                    idx[done : done + take], cfg.eta, radius, cap, captured,
                )
                done += take
                tb.record(theta)
            base += cfg.m
        if pick >= 0:
            theta = captured.copy()
    return tb.build(theta)


# ---------------------------------------------------------------------------
# SAGA


@dataclass
class SagaState:
    """Mutable solver state: current point, one stored gradient
    coefficient per sample, and the running mean g of the stored
    gradients.

    Since per-sample gradients are coef * x, storing the scalar coef
    reproduces the stored gradient exactly while keeping the table O(n)
    instead of O(n p); g always equals features.T @ coef_table / n up to
    roundoff drift.
    """

    theta: np.ndarray
    coef_table: np.ndarray
    mean_grad: np.ndarray

    @classmethod
    def initialize(cls, model, data, theta):
        """Anchor every sample at theta; costs n evaluations."""
        theta = np.array(theta, dtype=float)
        coefs = model.grad_coefs(data.features @ theta, data.targets)
        return cls(
            theta=theta,
            coef_table=coefs,
            mean_grad=data.features.T @ coefs / data.n,
        )

    def table_mean_gradient(self, data):
        """Recompute the table mean from scratch (the debug invariant)."""
        return data.features.T @ self.coef_table / data.n


def saga_direction(state, I, model, data):
    """Update direction for fresh minibatch I at the current point:

        mean_{i in I} (g_i(theta) - stored_i) + g.

    Unbiased over uniform I because the running mean g averages exactly
    the stored gradients.
    """
    I = np.asarray(I, dtype=np.int64)
    X = data.features
    c = model.grad_coefs(X[I] @ state.theta, data.targets[I])
    return X[I].T @ (c - state.coef_table[I]) / I.shape[0] + state.mean_grad


def saga_step(state, cfg, model, data, rng, I=None, J=None):
    """One step of the table-based method, in place on `state`.

    Draws the fresh batch I then the refresh batch J (each uniform over
    size-b subsets, without replacement, independent of each other) unless
    they are given explicitly.  The refresh gradients are evaluated at the
    pre-step point, matching the update order of the step kernels.
    """
    n = data.n
    if cfg.b > n:
        raise ValueError(f"minibatch size {cfg.b} exceeds dataset size {n}")
    if I is None:
        I = rng.choice(n, size=cfg.b, replace=False)
    if J is None:
        J = rng.choice(n, size=cfg.b, replace=False)
    I = np.asarray(I, dtype=np.int64)
    J = np.asarray(J, dtype=np.int64)
    saga_one_step(
        data.features, data.targets, model.kind_code, model.cutoff,
        state.theta, state.coef_table, state.mean_grad, I, J,
        cfg.eta, cfg.constraint.rad,
    )
    return state


def run_saga(model, data, cfg, theta0=None):
    """Restarted table-based variance reduction.

    Per restart: initialize the table at the current point (charged n),
    then K steps charging 2b each (b fresh + b refresh evaluations).
    Output per restart: last iterate or a uniformly random pre-step
    iterate; restarts chain through outputs.

    Draw order per restart: random-output index first (if any), then per
    step choice(n, b) for I followed by choice(n, b) for J.
    """
    lp = backend.loops()
    X, y = data.features, data.targets
    n, p = data.n, data.p
    if cfg.b > n:
        raise ValueError(f"minibatch size {cfg.b} exceeds dataset size {n}")
    theta = _init_theta(theta0, p, cfg.constraint).copy()
    radius = cfg.constraint.rad
    rng = np.random.default_rng(cfg.seed)
    tb = _TraceBuilder(model, data, _config_echo("saga", cfg), cfg.keep_iterates)
    tb.record(theta)
    step = 1 if cfg.debug_check else _chunk(n, cfg.trace_points_per_pass, 2 * cfg.b)
    captured = np.empty(p)
    for _ in range(cfg.restarts):
        pick = -1
        if cfg.output_mode == OUTPUT_RANDOM:
            pick = int(rng.integers(0, cfg.K))
        coefs = model.grad_coefs(X @ theta, y)
        g = X.T @ coefs / n
        tb.evals += n
        tb.record(theta)
        done = 0
        while done < cfg.K:
            take = min(step, cfg.K - done)
            I = np.empty((take, cfg.b), dtype=np.int64)
            J = np.empty((take, cfg.b), dtype=np.int64)
            for s in range(take):
                I[s] = rng.choice(n, size=cfg.b, replace=False)
                J[s] = rng.choice(n, size=cfg.b, replace=False)
            local = pick - done
            cap = local if 0 <= local < take else -1
            tb.evals += lp.saga_steps(
                X, y, model.kind_code, model.cutoff, theta, coefs, g, I, J,
                cfg.eta, radius, cap, captured,
            )
            done += take
            tb.record(theta)
            if cfg.debug_check:
                drift = float(np.max(np.abs(g - X.T @ coefs / n)))
                if drift > TABLE_CHECK_TOL:
                    raise RuntimeError(
                        f"stored table mean drifted {drift:.3e} from the table after "
                        f"{done} steps"
                    )
        if pick >= 0:
            theta = captured.copy()
    return tb.build(theta)


# ---------------------------------------------------------------------------
# defaults and dispatch


def default_hyperparams(family, n, smoothness, cond_guess):
    """Schedule defaults from the convergence analysis, one config per
    solver, keyed "gd" / "svrg" / "saga".

    With L the smoothness bound and q the condition guess (an estimate of
    L over the curvature floor): GD runs at eta = 1/(2L); the snapshot
    method at eta = 2/(5 L n^(2/3)) with epoch length 1.25n
    (classification) or 2.5n (regression) and n^(2/3) q^2 total inner
    steps (floored at one epoch); the table method at eta = 1/(5L) with
    minibatch n^(2/3) (classification) or 2 n^(2/3) (regression) and
    ceil(15 q^2) steps.  n^(2/3) is computed as cbrt(n)^2 so perfect
    cubes give exact arithmetic.
    """
    if family not in (CLASSIFICATION, REGRESSION):
        raise ValueError(f"unknown family {family!r}")
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    if not (smoothness > 0.0) or not math.isfinite(smoothness):
        raise ValueError(f"smoothness must be positive, got {smoothness!r}")
    if not (cond_guess >= 1.0) or not math.isfinite(cond_guess):
        raise ValueError(f"condition guess must be >= 1, got {cond_guess!r}")
    n23 = float(np.cbrt(float(n))) ** 2
    if family == CLASSIFICATION:
        m = int(math.floor(1.25 * n))
        b = int(math.ceil(n23))
    else:
        m = int(math.floor(2.5 * n))
        b = int(math.ceil(2.0 * n23))
    q2 = float(cond_guess) ** 2
    T = max(m, int(math.ceil(n23 * q2)))
    K = int(math.ceil(15.0 * q2))
    return {
        "gd": GdConfig(eta=1.0 / (2.0 * smoothness), max_passes=K),
        "svrg": SvrgConfig(eta=2.0 / (5.0 * smoothness * n23), m=m, T=T),
        "saga": SagaConfig(eta=1.0 / (5.0 * smoothness), b=min(b, n), K=K),
    }


RUNNERS = {
    "gd": run_batch_gd,
    "sgd": run_sgd,
    "svrg": run_svrg,
    "saga": run_saga,
}


def run_algorithm(name, model, data, cfg, theta0=None):
    if name not in RUNNERS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(RUNNERS)}")
    return RUNNERS[name](model, data, cfg, theta0)
