"""Experiment harness: dataset assembly, step-size grid search, reference
optima and full benchmark runs with on-disk traces.

A run directory ends up with one trace CSV per solver (rows
pass,objective,objective_gap,grad_norm,wall_ms) plus summary.json.  Gaps
are measured against the best objective value seen anywhere in the
experiment: the long reference run by default, or a benchmarked run that
beat it (recorded in the summary when that happens).  Trace CSVs are
byte-identical across reruns of the same config on the same backend; the
wall-clock column stays empty unless timing is requested, and measured
times go to the summary, which is exempt from byte-identity.
"""

import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, backend
from ._util import derived_seed
from .datagen import CovarianceSpec, NoiseSpec, synthetic_dataset
from .data_io import corrupt_targets, load_dataset, normalize_features
from .errors import DivergenceError, NoViableStepError
from .losses import CLASSIFICATION, REGRESSION, LossModel, smoothness_estimate
from .optim import (
    BallConstraint,
    GdConfig,
    SagaConfig,
    SgdConfig,
    SvrgConfig,
    default_hyperparams,
    run_algorithm,
    run_svrg,
)

ALGO_ORDER = ("gd", "sgd", "svrg", "saga")

DEFAULT_STEP_GRID = tuple(2.0 ** k for k in range(-10, 2))

DEFAULT_CUTOFF = 4.865


def _seed_of(base, *tags):
    return int(derived_seed(base, *tags).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one benchmark run.

    data holds either {"synthetic": {...}} (n, p, cond_ratio, scale,
    rotate, delta, sigma) or {"path": ..., "format", "target_column",
    "binary_classes", "normalize", "corrupt": {delta, sigma}}.
    algorithms maps solver names to override dicts ({} for theorem
    defaults); an explicit "eta" override skips grid search for that
    solver.
    """

    family: str
    data: dict
    out_dir: str
    algorithms: dict = field(
        default_factory=lambda: {"gd": {}, "sgd": {}, "svrg": {}, "saga": {}}
    )
    grid_search: bool = True
    step_grid: tuple = DEFAULT_STEP_GRID
    grid_budget_passes: int = 30
    budget_passes: int = 150
    reference_passes: int = 400
    radius: float | None = None
    cutoff: float = DEFAULT_CUTOFF
    cond_guess: float = 10.0
    smoothness_override: float | None = None
    base_seed: int = 0
    trace_points_per_pass: int = 4
    timing: bool = False

    def __post_init__(self):
        if self.family not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown family {self.family!r}")
        if not isinstance(self.data, dict) or not (
            ("synthetic" in self.data) ^ ("path" in self.data)
        ):
            raise ValueError("data must contain exactly one of 'synthetic' or 'path'")
        for name in self.algorithms:
            if name not in ALGO_ORDER:
                raise ValueError(f"unknown algorithm {name!r}; choose from {ALGO_ORDER}")
        object.__setattr__(self, "step_grid", tuple(float(s) for s in self.step_grid))
        if not self.step_grid:
            raise ValueError("step grid must be nonempty")
        for s in self.step_grid:
            if not (s > 0.0) or not math.isfinite(s):
                raise ValueError(f"grid steps must be positive, got {s!r}")
        for attr in ("grid_budget_passes", "budget_passes", "reference_passes"):
            if getattr(self, attr) < 1:
                raise ValueError(f"{attr} must be >= 1")
        if self.trace_points_per_pass < 1:
            raise ValueError("trace_points_per_pass must be >= 1")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "family" not in d or "data" not in d or "out_dir" not in d:
            raise ValueError("config needs at least family, data and out_dir")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["step_grid"] = list(self.step_grid)
        return d


@dataclass(frozen=True)
class ReferenceOptimum:
    """Best objective value seen along a long variance-reduced run, and
    the iterate achieving it."""

    theta: np.ndarray
    objective: float
    passes_used: float
    config: dict

    def to_dict(self):
        return {
            "objective": self.objective,
            "passes_used": self.passes_used,
            "theta": [float(v) for v in self.theta],
            "config": self.config,
        }

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        return cls(
            theta=np.array(d["theta"], dtype=float),
            objective=float(d["objective"]),
            passes_used=float(d["passes_used"]),
            config=d.get("config", {}),
        )

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# problem assembly


def build_problem(cfg):
    """(model, data, theta_star_or_None) for an ExperimentConfig."""
    if cfg.family == CLASSIFICATION:
        model = LossModel.classification()
    else:
        model = LossModel.robust_regression(cfg.cutoff)
    theta_star = None
    if "synthetic" in cfg.data:
        s = dict(cfg.data["synthetic"])
        cov = CovarianceSpec(
            p=int(s["p"]),
            cond_ratio=float(s.get("cond_ratio", 1.0)),
            scale=float(s.get("scale", 1.0)),
            rotate=bool(s.get("rotate", False)),
        )
        noise = None
        if cfg.family == REGRESSION:
            noise = NoiseSpec(float(s.get("delta", 0.0)), float(s.get("sigma", 1.0)))
        data, theta_star = synthetic_dataset(
            cfg.family, int(s["n"]), cov, seed=_seed_of(cfg.base_seed, "data"), noise=noise
        )
    else:
        d = dict(cfg.data)
        data = load_dataset(
            d["path"],
            fmt=d.get("format"),
            target_column=d.get("target_column"),
            binary_classes=d.get("binary_classes"),
            task=cfg.family,
        )
        if d.get("normalize", True):
            data = normalize_features(data)
        if d.get("corrupt"):
            if cfg.family != REGRESSION:
                raise ValueError("target corruption only applies to regression")
            c = d["corrupt"]
            data = corrupt_targets(
                data,
                NoiseSpec(float(c.get("delta", 0.0)), float(c.get("sigma", 1.0))),
                seed=_seed_of(cfg.base_seed, "corrupt"),
            )
    return model, data, theta_star


# ---------------------------------------------------------------------------
# schedules


_OVERRIDE_SKIP = {"eta"}  # handled before construction


def budgeted_config(
    algorithm,
    family,
    n,
    smoothness,
    cond_guess,
    eta,
    passes,
    seed,
    radius=None,
    points_per_pass=1,
    overrides=None,
):
    """Solver config with theorem-default schedule shapes sized to a pass
    budget.  Epoch length and minibatch size come from the analysis; the
    number of epochs/steps is chosen to spend at most `passes` passes."""
    base = default_hyperparams(family, n, smoothness, cond_guess)
    cons = BallConstraint(radius)
    ov = overrides or {}
    if algorithm == "gd":
        cfg = GdConfig(
            eta=eta, max_passes=passes, constraint=cons,
            trace_points_per_pass=points_per_pass,
        )
    elif algorithm == "sgd":
        cfg = SgdConfig(
            eta=eta, max_passes=passes, constraint=cons, seed=seed,
            trace_points_per_pass=points_per_pass,
        )
    elif algorithm == "svrg":
        # an overridden epoch length reshapes the whole schedule, so it
        # must be known before the budget is translated into epochs
        m = int(ov.get("m", base["svrg"].m))
        epochs = max(1, int(passes * n / (n + m)))
        cfg = SvrgConfig(
            eta=eta, m=m, T=epochs * m, constraint=cons, seed=seed,
            trace_points_per_pass=points_per_pass,
        )
    elif algorithm == "saga":
        b = int(ov.get("b", base["saga"].b))
        K = max(1, int((passes - 1) * n / (2 * b)))
        cfg = SagaConfig(
            eta=eta, b=b, K=K, constraint=cons, seed=seed,
            trace_points_per_pass=points_per_pass,
        )
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if overrides:
        clean = {k: v for k, v in overrides.items() if k not in _OVERRIDE_SKIP}
        known = {f.name for f in fields(cfg)}
        unknown = set(clean) - known
        if unknown:
            raise ValueError(f"unknown {algorithm} overrides: {sorted(unknown)}")
        if clean:
            cfg = replace(cfg, **clean)
    return cfg


def grid_search_step(
    model,
    data,
    algorithm,
    grid,
    budget_passes,
    seed,
    smoothness,
    cond_guess=10.0,
    radius=None,
    overrides=None,
):
    """Best constant step from a finite grid under a small pass budget.

    Every cell reruns the solver from the origin with the same seed, so
    cells differ only in the step.  Divergent cells are dropped; if all
    diverge a NoViableStepError is raised.  Selection: lowest final
    objective, exact ties resolved toward the larger step.
    """
    results = []
    for eta in grid:
        cfg = budgeted_config(
            algorithm, model.kind, data.n, smoothness, cond_guess, float(eta),
            budget_passes, seed, radius=radius, overrides=overrides,
        )
        try:
            trace = run_algorithm(algorithm, model, data, cfg)
        except DivergenceError:
            continue
        results.append((trace.final_objective, float(eta)))
    if not results:
        raise NoViableStepError(
            f"every step in the grid diverged for {algorithm} on n={data.n}"
        )
    best_obj = min(obj for obj, _ in results)
    return max(eta for obj, eta in results if obj == best_obj)


def reference_optimum(
    model,
    data,
    passes,
    seed,
    smoothness,
    cond_guess=10.0,
    radius=None,
    eta=None,
    points_per_pass=1,
):
    """High-accuracy baseline: a long run of the snapshot solver, returning
    the best objective recorded along it (not merely the final iterate).
    """
    base = default_hyperparams(model.kind, data.n, smoothness, cond_guess)["svrg"]
    if eta is None:
        eta = base.eta
    n = data.n
    epochs = max(1, int(passes * n / (n + base.m)))
    cfg = SvrgConfig(
        eta=float(eta),
        m=base.m,
        T=epochs * base.m,
        constraint=BallConstraint(radius),
        seed=seed,
        trace_points_per_pass=points_per_pass,
        keep_iterates=True,
    )
    trace = run_svrg(model, data, cfg)
    i, best = trace.best_row()
    return ReferenceOptimum(
        theta=trace.iterates[i],
        objective=best,
        passes_used=float(trace.passes[-1]),
        config={"algorithm": "svrg", "eta": float(eta), "m": base.m, "T": epochs * base.m,
                "seed": seed, "radius": radius},
    )


# ---------------------------------------------------------------------------
# full experiment


def run_experiment(cfg):
    """Run every configured solver on one problem and write traces plus a
    summary into cfg.out_dir.  Returns the summary dict."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, data, theta_star = build_problem(cfg)
    n = data.n
    if cfg.smoothness_override is not None:
        L = float(cfg.smoothness_override)
    else:
        L = smoothness_estimate(
            model, data, probes=32, seed=_seed_of(cfg.base_seed, "smoothness"),
            radius=cfg.radius if cfg.radius is not None else 1.0,
        )
    ref_eta = None
    if cfg.grid_search:
        ref_eta = grid_search_step(
            model, data, "svrg", cfg.step_grid, cfg.grid_budget_passes,
            _seed_of(cfg.base_seed, "grid", "reference"), L,
            cond_guess=cfg.cond_guess, radius=cfg.radius,
        )
    ref = reference_optimum(
        model, data, cfg.reference_passes, _seed_of(cfg.base_seed, "reference"),
        L, cond_guess=cfg.cond_guess, radius=cfg.radius, eta=ref_eta,
    )

    traces = {}
    selected = {}
    statuses = {}
    walls = {}
    for name in ALGO_ORDER:
        if name not in cfg.algorithms:
            continue
        overrides = dict(cfg.algorithms[name] or {})
        ppp = int(overrides.pop("trace_points_per_pass", cfg.trace_points_per_pass))
        if "eta" in overrides:
            eta = float(overrides["eta"])
        elif cfg.grid_search:
            try:
                eta = grid_search_step(
                    model, data, name, cfg.step_grid, cfg.grid_budget_passes,
                    _seed_of(cfg.base_seed, "grid", name), L,
                    cond_guess=cfg.cond_guess, radius=cfg.radius, overrides=overrides,
                )
            except NoViableStepError:
                statuses[name] = "no-viable-step"
                continue
        else:
            defaults = default_hyperparams(model.kind, n, L, cfg.cond_guess)
            eta = defaults[name].eta if name in defaults else defaults["gd"].eta
        run_cfg = budgeted_config(
            name, model.kind, n, L, cfg.cond_guess, eta, cfg.budget_passes,
            _seed_of(cfg.base_seed, "run", name), radius=cfg.radius,
            points_per_pass=ppp, overrides=overrides,
        )
        t_start = time.perf_counter()
        try:
            trace = run_algorithm(name, model, data, run_cfg)
            statuses[name] = "ok"
        except DivergenceError as exc:
            trace = exc.trace
            statuses[name] = "diverged"
        walls[name] = time.perf_counter() - t_start
        selected[name] = eta
        if trace is not None:
            traces[name] = trace

    # gaps are against the best value this experiment has ever seen
    gap_ref = ref.objective
    improved_by = None
    for name, trace in traces.items():
        low = trace.best_row()[1]
        if low < gap_ref:
            gap_ref = low
            improved_by = name

    wall_mode = "measured" if cfg.timing else "blank"
    algo_summaries = {}
    for name in ALGO_ORDER:
        if name not in traces and name not in statuses:
            continue
        entry = {"status": statuses.get(name, "missing")}
        if name in traces:
            trace = traces[name]
            csv_path = out / f"trace_{name}.csv"
            trace.to_csv(csv_path, reference=gap_ref, wall_mode=wall_mode)
            entry.update(
                eta=selected.get(name),
                final_objective=trace.final_objective,
                final_gap=max(trace.final_objective - gap_ref, 1e-16),
                passes=float(trace.passes[-1]),
                grad_evals=int(trace.grad_evals),
                wall_s=walls.get(name),
                trace_csv=csv_path.name,
            )
        algo_summaries[name] = entry

    summary = {
        "version": __version__,
        "backend": backend.name(),
        "family": cfg.family,
        "n": n,
        "p": data.p,
        "radius": cfg.radius,
        "smoothness": L,
        "cond_guess": cfg.cond_guess,
        "budget_passes": cfg.budget_passes,
        "grid_search": cfg.grid_search,
        "step_grid": list(cfg.step_grid) if cfg.grid_search else None,
        "base_seed": cfg.base_seed,
        "data_meta": _jsonable(data.meta),
        "theta_star_norm": None if theta_star is None else float(np.linalg.norm(theta_star)),
        "reference": {
            "objective": ref.objective,
            "passes_used": ref.passes_used,
            "eta": ref.config.get("eta"),
        },
        "gap_reference": gap_ref,
        "reference_improved_by": improved_by,
        "algorithms": algo_summaries,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
