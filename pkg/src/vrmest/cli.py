"""Command-line front end.

Subcommands:
  gen        write a synthetic dataset to CSV (plus a meta JSON)
  fit        run one solver on one dataset, write its trace CSV
  sweep      run a full benchmark experiment from a JSON config
  reference  compute a high-accuracy baseline objective, write JSON
  landscape  population-landscape diagnostics, write a report JSON
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from .datagen import CovarianceSpec, NoiseSpec, synthetic_dataset
from .data_io import corrupt_targets, load_dataset, normalize_features, save_dataset_csv
from .errors import DivergenceError, NoViableStepError
from .harness import (
    DEFAULT_CUTOFF,
    ExperimentConfig,
    ReferenceOptimum,
    budgeted_config,
    grid_search_step,
    reference_optimum,
    run_experiment,
)
from .landscape import (
    LandscapeReport,
    PopulationOracle,
    ProbeGrid,
    grad_deviation_sup,
    hess_deviation_sup,
    kappa0_estimate,
    mu0_estimate,
    population_gradient_stderr,
)
from .losses import CLASSIFICATION, REGRESSION, LossModel, smoothness_estimate
from .optim import default_hyperparams, run_algorithm


def _add_family_args(p):
    p.add_argument(
        "--family", choices=[CLASSIFICATION, REGRESSION], required=True,
        help="loss family",
    )
    p.add_argument(
        "--cutoff", type=float, default=DEFAULT_CUTOFF,
        help="bisquare cutoff for regression (default %(default)s)",
    )


def _add_synth_args(p, require=False):
    g = p.add_argument_group("synthetic data")
    g.add_argument("--n", type=int, default=None, required=require, help="number of rows")
    g.add_argument("--p", type=int, default=None, required=require, help="feature dimension")
    g.add_argument("--cond", type=float, default=1.0, help="covariance condition ratio")
    g.add_argument("--scale", type=float, default=1.0, help="smallest covariance eigenvalue")
    g.add_argument("--rotate", action="store_true", help="random covariance rotation")
    g.add_argument("--delta", type=float, default=0.0, help="wide-noise probability (regression)")
    g.add_argument("--sigma", type=float, default=1.0, help="wide-noise scale (regression)")
    g.add_argument("--data-seed", type=int, default=0, help="dataset seed")


def _add_file_args(p):
    g = p.add_argument_group("file data")
    g.add_argument("--data", default=None, help="dataset path (csv or libsvm)")
    g.add_argument("--format", choices=["csv", "libsvm"], default=None,
                   help="force a format instead of sniffing the extension")
    g.add_argument("--target-column", default=None, help="CSV target column (name or index)")
    g.add_argument("--binary-classes", nargs=2, type=float, default=None,
                   metavar=("NEG", "POS"), help="pick two classes from a multiclass file")
    g.add_argument("--no-normalize", action="store_true",
                   help="skip [-1,1] feature normalization for file data")
    g.add_argument("--corrupt-delta", type=float, default=None,
                   help="corrupt regression targets: wide-noise probability")
    g.add_argument("--corrupt-sigma", type=float, default=5.0,
                   help="corrupt regression targets: wide-noise scale")
    g.add_argument("--corrupt-seed", type=int, default=0)


def _model_of(args):
    if args.family == CLASSIFICATION:
        return LossModel.classification()
    return LossModel.robust_regression(args.cutoff)


def _dataset_of(args):
    if args.data is not None:
        tc = args.target_column
        if tc is not None and tc.lstrip("-").isdigit():
            tc = int(tc)
        data = load_dataset(
            args.data, fmt=args.format, target_column=tc,
            binary_classes=args.binary_classes, task=args.family,
        )
        if not args.no_normalize:
            data = normalize_features(data)
        if args.corrupt_delta is not None:
            if args.family != REGRESSION:
                raise ValueError("target corruption only applies to regression")
            data = corrupt_targets(
                data, NoiseSpec(args.corrupt_delta, args.corrupt_sigma), args.corrupt_seed
            )
        return data
    if args.n is None or args.p is None:
        raise ValueError("either --data or both --n and --p are required")
    cov = CovarianceSpec(p=args.p, cond_ratio=args.cond, scale=args.scale, rotate=args.rotate)
    noise = NoiseSpec(args.delta, args.sigma) if args.family == REGRESSION else None
    data, _ = synthetic_dataset(args.family, args.n, cov, seed=args.data_seed, noise=noise)
    return data


def _smoothness_of(args, model, data):
    if args.smoothness is not None:
        return args.smoothness
    return smoothness_estimate(
        model, data, probes=32, seed=args.seed,
        radius=args.radius if args.radius is not None else 1.0,
    )


def cmd_gen(args):
    cov = CovarianceSpec(p=args.p, cond_ratio=args.cond, scale=args.scale, rotate=args.rotate)
    noise = NoiseSpec(args.delta, args.sigma) if args.family == REGRESSION else None
    data, theta_star = synthetic_dataset(
        args.family, args.n, cov, seed=args.data_seed, noise=noise
    )
    save_dataset_csv(data, args.out)
    meta = dict(data.meta)
    meta["theta_star"] = [float(v) for v in theta_star]
    meta_path = args.meta_out or (args.out + ".meta.json")
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {data.n} x {data.p} dataset to {args.out} (meta: {meta_path})")
    return 0


def cmd_fit(args):
    model = _model_of(args)
    data = _dataset_of(args)
    L = _smoothness_of(args, model, data)
    eta = args.eta
    if eta is None and args.grid_search:
        eta = grid_search_step(
            model, data, args.algorithm, [2.0 ** k for k in range(-10, 2)],
            args.grid_budget, args.seed, L, cond_guess=args.cond_guess, radius=args.radius,
        )
        print(f"grid-searched step: {eta}")
    elif eta is None:
        defaults = default_hyperparams(model.kind, data.n, L, args.cond_guess)
        eta = (defaults[args.algorithm] if args.algorithm in defaults else defaults["gd"]).eta
        print(f"theorem-default step: {eta}")
    cfg = budgeted_config(
        args.algorithm, model.kind, data.n, L, args.cond_guess,
        eta, args.passes, args.seed,
        radius=args.radius, points_per_pass=args.points_per_pass,
    )
    try:
        trace = run_algorithm(args.algorithm, model, data, cfg)
    except DivergenceError as exc:
        trace = exc.trace
        print(f"run diverged: {exc}", file=sys.stderr)
    reference = None
    if args.reference:
        reference = ReferenceOptimum.from_json(args.reference).objective
    trace.to_csv(args.out, reference=reference, wall_mode="measured")
    print(
        f"{args.algorithm}: {trace.passes[-1]:.2f} passes, "
        f"objective {trace.final_objective:.6e}, "
        f"grad norm {trace.grad_norm[-1]:.3e}, backend {trace.backend}"
    )
    print(f"trace written to {args.out}")
    return 0


def cmd_sweep(args):
    cfg = ExperimentConfig.from_json(args.config)
    if args.out_dir:
        d = cfg.to_dict()
        d["out_dir"] = args.out_dir
        cfg = ExperimentConfig.from_dict(d)
    summary = run_experiment(cfg)
    print(f"backend: {summary['backend']}")
    print(f"reference objective: {summary['reference']['objective']:.6e}")
    if summary["reference_improved_by"]:
        print(
            f"note: {summary['reference_improved_by']} beat the reference; "
            f"gaps use {summary['gap_reference']:.6e}"
        )
    for name, entry in summary["algorithms"].items():
        if entry["status"] != "ok":
            print(f"  {name}: {entry['status']}")
            continue
        print(
            f"  {name}: eta {entry['eta']}, final gap {entry['final_gap']:.3e}, "
            f"{entry['passes']:.1f} passes"
        )
    print(f"summary written to {cfg.out_dir}/summary.json")
    return 0


def cmd_reference(args):
    model = _model_of(args)
    data = _dataset_of(args)
    L = _smoothness_of(args, model, data)
    eta = args.eta
    if eta is None:
        eta = grid_search_step(
            model, data, "svrg", [2.0 ** k for k in range(-10, 2)],
            args.grid_budget, args.seed, L, cond_guess=args.cond_guess, radius=args.radius,
        )
        print(f"grid-searched step: {eta}")
    ref = reference_optimum(
        model, data, args.passes, args.seed, L,
        cond_guess=args.cond_guess, radius=args.radius, eta=eta,
    )
    ref.to_json(args.out)
    print(f"reference objective {ref.objective:.8e} after {ref.passes_used:.1f} passes")
    print(f"written to {args.out}")
    return 0


def cmd_landscape(args):
    model = _model_of(args)
    cov_spec = CovarianceSpec(
        p=args.p, cond_ratio=args.cond, scale=args.scale, rotate=args.rotate,
        seed=args.seed,
    )
    from .datagen import make_covariance, sample_theta_star

    cov = make_covariance(cov_spec)
    theta_star = sample_theta_star(args.p, args.seed + 1)
    noise = NoiseSpec(args.delta, args.sigma) if args.family == REGRESSION else None
    n_pop = args.n_pop
    if n_pop is None:
        n_pop = max(100_000, 10 * (args.n or 0))
    oracle = PopulationOracle.draw(
        args.family, cov, theta_star, n_pop, args.seed + 2, noise=noise
    )
    radii = tuple(float(r) for r in args.radii.split(","))
    grid = ProbeGrid(radii=radii, directions=args.directions, seed=args.seed + 3)
    report = LandscapeReport(
        family=args.family, n=args.n, p=args.p, n_pop=n_pop,
        grid={"radii": list(radii), "directions": args.directions, "seed": args.seed + 3},
        seeds={"base": args.seed},
        extra={"cond_ratio": args.cond, "scale": args.scale, "rotate": args.rotate},
    )
    report.mu0_hat = mu0_estimate(model, oracle, grid)
    report.kappa0_hat = kappa0_estimate(
        model, oracle, args.epsilon, probes=args.probes, seed=args.seed + 4
    )
    print(f"mu0 estimate:    {report.mu0_hat:.6f}")
    print(f"kappa0 estimate: {report.kappa0_hat:.6f}")
    if args.n:
        if args.family == CLASSIFICATION:
            from .datagen import label_binary, sample_features

            X = sample_features(args.n, cov, args.seed + 5)
            y = label_binary(X, theta_star, args.seed + 6)
        else:
            from .datagen import label_regression, sample_features

            X = sample_features(args.n, cov, args.seed + 5)
            y = label_regression(X, theta_star, noise, args.seed + 6)
        from .losses import DataSet

        data = DataSet(X, y, {"source": "synthetic"})
        dev, arg = grad_deviation_sup(model, data, oracle, grid, return_argmax=True)
        report.grad_dev_sup = dev
        report.grad_dev_stderr = population_gradient_stderr(model, arg, oracle)
        report.hess_dev_sup = hess_deviation_sup(model, data, oracle, grid)
        print(f"grad deviation sup:  {report.grad_dev_sup:.6f} "
              f"(MC stderr {report.grad_dev_stderr:.2e})")
        print(f"hess deviation sup:  {report.hess_dev_sup:.6f}")
    report.to_json(args.out)
    print(f"report written to {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="vrmest",
        description="Variance-reduced solvers and landscape diagnostics "
        "for non-convex M-estimation",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    _add_family_args(g)
    _add_synth_args(g, require=True)
    g.add_argument("--out", required=True, help="output CSV path")
    g.add_argument("--meta-out", default=None, help="meta JSON path (default OUT.meta.json)")
    g.set_defaults(fn=cmd_gen)

    f = sub.add_parser("fit", help="run one solver, write a trace CSV")
    _add_family_args(f)
    _add_synth_args(f)
    _add_file_args(f)
    f.add_argument("--algorithm", choices=["gd", "sgd", "svrg", "saga"], required=True)
    f.add_argument("--eta", type=float, default=None,
                   help="constant step (default: theorem schedule or grid search)")
    f.add_argument("--grid-search", action="store_true",
                   help="grid-search the step when --eta is not given")
    f.add_argument("--grid-budget", type=int, default=30, help="passes per grid cell")
    f.add_argument("--passes", type=int, default=50, help="pass budget")
    f.add_argument("--radius", type=float, default=None, help="constraint ball radius")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--cond-guess", type=float, default=10.0)
    f.add_argument("--smoothness", type=float, default=None, help="override the estimate")
    f.add_argument("--points-per-pass", type=int, default=4, help="trace rows per pass")
    f.add_argument("--reference", default=None, help="reference JSON for the gap column")
    f.add_argument("--out", required=True, help="trace CSV path")
    f.set_defaults(fn=cmd_fit)

    s = sub.add_parser("sweep", help="full benchmark from a JSON config")
    s.add_argument("--config", required=True, help="experiment config JSON")
    s.add_argument("--out-dir", default=None, help="override the config's out_dir")
    s.set_defaults(fn=cmd_sweep)

    r = sub.add_parser("reference", help="long-run baseline objective")
    _add_family_args(r)
    _add_synth_args(r)
    _add_file_args(r)
    r.add_argument("--passes", type=int, default=1000)
    r.add_argument("--eta", type=float, default=None,
                   help="constant step (default: grid-searched)")
    r.add_argument("--grid-budget", type=int, default=30)
    r.add_argument("--radius", type=float, default=None)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--cond-guess", type=float, default=10.0)
    r.add_argument("--smoothness", type=float, default=None)
    r.add_argument("--out", required=True, help="reference JSON path")
    r.set_defaults(fn=cmd_reference)

    l = sub.add_parser("landscape", help="population landscape diagnostics")
    _add_family_args(l)
    l.add_argument("--p", type=int, required=True)
    l.add_argument("--cond", type=float, default=1.0)
    l.add_argument("--scale", type=float, default=1.0)
    l.add_argument("--rotate", action="store_true")
    l.add_argument("--delta", type=float, default=0.0)
    l.add_argument("--sigma", type=float, default=1.0)
    l.add_argument("--n", type=int, default=None,
                   help="empirical sample size for deviation sups (omit to skip)")
    l.add_argument("--n-pop", type=int, default=None,
                   help="oracle draw size (default max(1e5, 10n))")
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--radii", default="0.5,1.0,2.0", help="probe radii, comma separated")
    l.add_argument("--directions", type=int, default=8, help="directions per radius")
    l.add_argument("--epsilon", type=float, default=0.25, help="curvature probe ball radius")
    l.add_argument("--probes", type=int, default=16, help="curvature probe count")
    l.add_argument("--out", required=True, help="report JSON path")
    l.set_defaults(fn=cmd_landscape)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, NoViableStepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
