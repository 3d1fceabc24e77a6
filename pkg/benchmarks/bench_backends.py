"""Time the compiled step loops against the pure-numpy fallback.

Both backends expose the same three kernels (sgd_steps, svrg_steps,
saga_steps).  This script feeds them identical data and identical
pregenerated index streams, so the two backends do exactly the same
arithmetic up to summation order, and reports the best-of-repeats wall
time per kernel together with the speedup.

Run from the repo root:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --n 50000 --p 200 --steps 100000
"""

import argparse
import time

import numpy as np

from vrmest import _loops_np
from vrmest.losses import LossModel

try:
    from vrmest import _loops_nb
except ImportError:
    _loops_nb = None


def make_problem(family, n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if family == "classification":
        model = LossModel.classification()
        y = rng.integers(0, 2, n).astype(float)
        radius = np.inf
    else:
        model = LossModel.robust_regression(4.865)
        y = X @ (rng.standard_normal(p) / np.sqrt(p)) + rng.standard_normal(n)
        radius = 10.0
    theta0 = rng.standard_normal(p) * 0.1
    return model, X, y, theta0, radius


def bench_kernel(loops, kernel, model, X, y, theta0, radius, idx, eta, repeats):
    """Best wall time over repeats; each repeat redoes identical work."""
    n, p = X.shape
    kc, t0 = model.kind_code, model.cutoff
    cap = np.empty(p)
    best = np.inf
    for _ in range(repeats):
        theta = theta0.copy()
        if kernel == "sgd":
            tic = time.perf_counter()
            loops.sgd_steps(X, y, kc, t0, theta, idx, eta, radius)
        elif kernel == "svrg":
            snap_coefs = model.grad_coefs(X @ theta, y)
            snap_grad = X.T @ snap_coefs / n
            tic = time.perf_counter()
            loops.svrg_steps(X, y, kc, t0, theta, snap_coefs, snap_grad, idx,
                             eta, radius, -1, cap)
        else:
            table = model.grad_coefs(X @ theta, y)
            g = X.T @ table / n
            I, J = idx
            tic = time.perf_counter()
            loops.saga_steps(X, y, kc, t0, theta, table, g, I, J, eta, radius,
                             -1, cap)
        best = min(best, time.perf_counter() - tic)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="samples")
    ap.add_argument("--p", type=int, default=100, help="features")
    ap.add_argument("--steps", type=int, default=50000,
                    help="inner steps for sgd/svrg; saga gets steps//b updates")
    ap.add_argument("--b", type=int, default=16, help="saga minibatch size")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--eta", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _loops_nb is None:
        print("numba is not importable; nothing to compare against the fallback")
        return

    rng = np.random.default_rng(args.seed)
    idx_flat = rng.integers(0, args.n, size=args.steps)
    updates = max(1, args.steps // args.b)
    I = rng.integers(0, args.n, size=(updates, args.b))
    J = rng.integers(0, args.n, size=(updates, args.b))

    print(f"n={args.n} p={args.p} sgd/svrg steps={args.steps} "
          f"saga updates={updates} (b={args.b}) repeats={args.repeats}, best shown")
    print()
    header = f"{'kernel':<6} {'family':<15} {'numba':>12} {'numpy':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for family in ("classification", "regression"):
        model, X, y, theta0, radius = make_problem(family, args.n, args.p, args.seed + 1)
        for kernel in ("sgd", "svrg", "saga"):
            idx = (I, J) if kernel == "saga" else idx_flat
            # first compiled call pays for jit compilation; warm on a tiny slice
            warm = (I[:1], J[:1]) if kernel == "saga" else idx_flat[:1]
            bench_kernel(_loops_nb, kernel, model, X, y, theta0, radius, warm,
                         args.eta, 1)
            t_nb = bench_kernel(_loops_nb, kernel, model, X, y, theta0, radius,
                                idx, args.eta, args.repeats)
            t_np = bench_kernel(_loops_np, kernel, model, X, y, theta0, radius,
                                idx, args.eta, args.repeats)
            print(f"{kernel:<6} {family:<15} {t_nb * 1e3:>9.1f} ms {t_np * 1e3:>9.1f} ms "
                  f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
