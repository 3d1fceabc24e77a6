"""Loss families for the two estimation problems.

Both families have linear-score structure: each per-sample loss depends on
the parameter only through the scalar score u = <theta, x>.  Writing the
loss as a function of u, the per-sample gradient is coef(u, y) * x and the
per-sample Hessian is hcoef(u, y) * x x^T with scalar coefficients.  The
batch oracles below exploit that: a dense n x p problem needs one matvec
plus O(n) scalar work per objective or gradient call.

Families:
  * binary classification with squared sigmoid error, (y - sigma(u))^2
    for y in {0, 1};
  * robust linear regression with the smooth redescending bisquare loss
    rho(y - u), whose influence is exactly zero outside a cutoff.
"""

import math
from dataclasses import dataclass, field

import numpy as np

# Dense Hessians are only meant for diagnostics; refuse silly dimensions.
HESSIAN_DIM_LIMIT = 2000

CLASSIFICATION = "classification"
REGRESSION = "regression"

_KIND_CODES = {CLASSIFICATION: 0, REGRESSION: 1}


# ---------------------------------------------------------------------------
# scalar kernels
#
# These are plain-Python on purpose: the compiled backend njit-wraps the
# exact same source so both execution paths share one definition of the
# branch structure.


def _sigmoid_scalar(a):
    # branch on sign so exp never sees a positive overflow argument
    if a >= 0.0:
        z = 1.0 / (1.0 + math.exp(-a))
    else:
        e = math.exp(a)
        z = e / (1.0 + e)
    return z


def _grad_coef_scalar(kind, t0, u, y):
    # d(loss)/du for one sample; the per-sample gradient is this times x.
    # Self-contained (no helper calls) so the compiled backend can wrap it.
    if kind == 0:
        if u >= 0.0:
            z = 1.0 / (1.0 + math.exp(-u))
        else:
            e = math.exp(u)
            z = e / (1.0 + e)
        return 2.0 * (z - y) * z * (1.0 - z)
    t = y - u
    w = t / t0
    v = w * w
    if v > 1.0:
        return 0.0
    one = 1.0 - v
    return -6.0 * t * one * one / (t0 * t0)


def sigmoid_eval(alpha):
    """Sigmoid and its first three derivatives at a scalar point.

    Returns (value, d1, d2, d3).  The derivatives come from the value
    alone: with z = sigma(alpha),

        d1 = z(1-z),  d2 = d1(1-2z),  d3 = d1(1 - 6z + 6z^2),

    which keeps everything stable for |alpha| up to the exp overflow edge.
    """
    a = float(alpha)
    if not math.isfinite(a):
        raise ValueError(f"sigmoid argument must be finite, got {alpha!r}")
    z = _sigmoid_scalar(a)
    d1 = z * (1.0 - z)
    d2 = d1 * (1.0 - 2.0 * z)
    d3 = d1 * (1.0 - 6.0 * z + 6.0 * z * z)
    return z, d1, d2, d3


def tukey_eval(t, t0):
    """Bisquare loss rho and its first three derivatives at a scalar point.

    Inside the cutoff (|t| <= t0, u = t/t0):

        rho  = 1 - (1 - u^2)^3
        psi  = 6 t (1 - u^2)^2 / t0^2
        psi' = 6 (1 - u^2)(1 - 5 u^2) / t0^2
        psi''= (120 u^3 - 72 u) / t0^3

    and outside it rho = 1 with all derivatives zero.  At |t| = t0 the
    interior formulas are used, so rho, psi, psi' are continuous there and
    psi'' takes its one-sided interior limit +-48/t0^3.
    """
    t0 = float(t0)
    if not (t0 > 0.0) or not math.isfinite(t0):
        raise ValueError(f"cutoff must be positive and finite, got {t0!r}")
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"residual must be finite, got {t!r}")
    w = t / t0
    v = w * w
    if v > 1.0:
        return 1.0, 0.0, 0.0, 0.0
    one = 1.0 - v
    rho = 1.0 - one * one * one
    psi = 6.0 * t * one * one / (t0 * t0)
    d1 = 6.0 * one * (1.0 - 5.0 * v) / (t0 * t0)
    d2 = (120.0 * v - 72.0) * w / (t0 * t0 * t0)
    return rho, psi, d1, d2


# ---------------------------------------------------------------------------
# vectorized kernels (1-d score arrays)


def _sigmoid_vec(a):
    a = np.asarray(a, dtype=float)
    z = np.empty_like(a)
    pos = a >= 0.0
    z[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    z[~pos] = e / (1.0 + e)
    return z


def _tukey_vec(t, t0):
    """(rho, psi, psi', psi'') elementwise, with the same branch rule as
    the scalar version."""
    t = np.asarray(t, dtype=float)
    w = t / t0
    v = w * w
    inside = v <= 1.0
    one = np.where(inside, 1.0 - v, 0.0)
    rho = np.where(inside, 1.0 - one * one * one, 1.0)
    psi = np.where(inside, 6.0 * t * one * one / (t0 * t0), 0.0)
    d1 = np.where(inside, 6.0 * one * (1.0 - 5.0 * v) / (t0 * t0), 0.0)
    d2 = np.where(inside, (120.0 * v - 72.0) * w / (t0 * t0 * t0), 0.0)
    return rho, psi, d1, d2


def _loss_terms(kind, t0, u, y):
    if kind == 0:
        z = _sigmoid_vec(u)
        d = y - z
        return d * d
    rho, _, _, _ = _tukey_vec(y - u, t0)
    return rho


def _grad_coefs(kind, t0, u, y):
    if kind == 0:
        z = _sigmoid_vec(u)
        return 2.0 * (z - y) * z * (1.0 - z)
    _, psi, _, _ = _tukey_vec(y - u, t0)
    return -psi


def _hess_coefs(kind, t0, u, y):
    if kind == 0:
        z = _sigmoid_vec(u)
        d1 = z * (1.0 - z)
        d2 = d1 * (1.0 - 2.0 * z)
        return 2.0 * (d1 * d1 + (z - y) * d2)
    _, _, pd1, _ = _tukey_vec(y - u, t0)
    return pd1


# ---------------------------------------------------------------------------
# model / data containers


@dataclass(frozen=True)
class SigmoidLink:
    """Stateless sigmoid link; thin object wrapper over sigmoid_eval."""

    def value(self, a):
        return _sigmoid_vec(a)

    def derivatives(self, a):
        """(value, d1, d2, d3) elementwise."""
        z = _sigmoid_vec(a)
        d1 = z * (1.0 - z)
        d2 = d1 * (1.0 - 2.0 * z)
        d3 = d1 * (1.0 - 6.0 * z + 6.0 * z * z)
        return z, d1, d2, d3


@dataclass(frozen=True)
class TukeyLoss:
    """Bisquare loss with cutoff t0; rho saturates at 1 past the cutoff."""

    t0: float

    def __post_init__(self):
        if not (self.t0 > 0.0) or not math.isfinite(self.t0):
            raise ValueError(f"cutoff must be positive and finite, got {self.t0!r}")

    def rho(self, t):
        return _tukey_vec(t, self.t0)[0]

    def psi(self, t):
        return _tukey_vec(t, self.t0)[1]

    def psi_deriv(self, t):
        return _tukey_vec(t, self.t0)[2]

    def psi_deriv2(self, t):
        return _tukey_vec(t, self.t0)[3]


@dataclass(frozen=True)
class Sample:
    """One observation: feature vector x and scalar target y."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("sample features must be a nonempty 1-d vector")
        if not np.isfinite(x).all() or not math.isfinite(float(self.y)):
            raise ValueError("sample contains non-finite values")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class DataSet:
    """Dense design matrix plus targets, immutable once built.

    meta is a free-form provenance dict (generator seeds, source path,
    normalization bounds); it never affects numerics.
    """

    features: np.ndarray
    targets: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=float)
        y = np.ascontiguousarray(self.targets, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise ValueError(f"features must be a nonempty 2-d matrix, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(
                f"targets must be 1-d with one entry per row, got {y.shape} for {X.shape[0]} rows"
            )
        if not np.isfinite(X).all():
            raise ValueError("features contain non-finite values")
        if not np.isfinite(y).all():
            raise ValueError("targets contain non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    def sample(self, i):
        return Sample(self.features[i], float(self.targets[i]))


@dataclass(frozen=True)
class LossModel:
    """One of the two loss families, with its vectorized coefficient maps.

    kind_code / cutoff are the plain scalars the compiled step kernels
    take, so a model can be passed down without object overhead.
    """

    kind: str
    link: SigmoidLink | None = None
    robust: TukeyLoss | None = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown loss family {self.kind!r}")
        if self.kind == CLASSIFICATION and self.link is None:
            raise ValueError("classification model needs a link")
        if self.kind == REGRESSION and self.robust is None:
            raise ValueError("regression model needs a robust loss")

    @classmethod
    def classification(cls):
        return cls(kind=CLASSIFICATION, link=SigmoidLink())

    @classmethod
    def robust_regression(cls, t0):
        return cls(kind=REGRESSION, robust=TukeyLoss(float(t0)))

    @property
    def kind_code(self):
        return _KIND_CODES[self.kind]

    @property
    def cutoff(self):
        # kernels want a float even when the family has no cutoff
        return self.robust.t0 if self.robust is not None else 0.0

    def loss_terms(self, scores, targets):
        return _loss_terms(self.kind_code, self.cutoff, scores, targets)

    def grad_coefs(self, scores, targets):
        return _grad_coefs(self.kind_code, self.cutoff, scores, targets)

    def hess_coefs(self, scores, targets):
        return _hess_coefs(self.kind_code, self.cutoff, scores, targets)


# ---------------------------------------------------------------------------
# pointwise and batch oracles


def _check_theta(theta, p):
    theta = np.ascontiguousarray(theta, dtype=float)
    if theta.shape != (p,):
        raise ValueError(f"parameter has shape {theta.shape}, expected ({p},)")
    if not np.isfinite(theta).all():
        raise ValueError("parameter contains non-finite values")
    return theta


def sample_loss(model, theta, sample):
    """Loss of one sample at theta."""
    theta = _check_theta(theta, sample.x.shape[0])
    u = float(sample.x @ theta)
    return float(_loss_terms(model.kind_code, model.cutoff, np.array([u]), np.array([sample.y]))[0])


def sample_gradient(model, theta, sample):
    """Gradient of one sample's loss at theta: coef(u, y) * x."""
    theta = _check_theta(theta, sample.x.shape[0])
    u = float(sample.x @ theta)
    c = _grad_coef_scalar(model.kind_code, model.cutoff, u, sample.y)
    return c * sample.x


def batch_objective(model, theta, data):
    """Average loss over the dataset."""
    theta = _check_theta(theta, data.p)
    u = data.features @ theta
    return float(np.mean(model.loss_terms(u, data.targets)))


def batch_gradient(model, theta, data):
    """Average gradient over the dataset, as one matvec pair."""
    theta = _check_theta(theta, data.p)
    u = data.features @ theta
    c = model.grad_coefs(u, data.targets)
    return data.features.T @ c / data.n


def batch_hessian(model, theta, data):
    """Dense average Hessian sum_i hcoef_i x_i x_i^T / n, exactly symmetric."""
    theta = _check_theta(theta, data.p)
    if data.p > HESSIAN_DIM_LIMIT:
        raise ValueError(
            f"dense Hessian refused for p={data.p} > {HESSIAN_DIM_LIMIT}; "
            "use operator-norm probes instead"
        )
    u = data.features @ theta
    c = model.hess_coefs(u, data.targets)
    H = (data.features * c[:, None]).T @ data.features / data.n
    return (H + H.T) / 2.0


def smoothness_estimate(model, data, probes=32, seed=0, radius=1.0):
    """Estimated smoothness constant of the sample objectives.

    Each per-sample Hessian is hcoef * x x^T, a rank-one matrix whose
    operator norm is exactly |hcoef| * ||x||^2.  We take the max of that
    over all samples at `probes` random points in a ball of the given
    radius around the origin (plus the origin itself), then pad by 10%
    as a safety margin against the finite probe set.
    """
    if probes < 1:
        raise ValueError("need at least one probe point")
    if not (radius > 0.0):
        raise ValueError("probe radius must be positive")
    rng = np.random.default_rng(seed)
    from ._util import uniform_ball

    pts = np.vstack([np.zeros((1, data.p)), uniform_ball(rng, probes, data.p, radius)])
    xsq = np.einsum("ij,ij->i", data.features, data.features)
    worst = 0.0
    for theta in pts:
        u = data.features @ theta
        c = np.abs(model.hess_coefs(u, data.targets))
        worst = max(worst, float(np.max(c * xsq)))
    return 1.1 * worst
