"""Compare the numba and numpy Hamiltonian kernels.

Times value/gradient and Hessian evaluation on time grids of increasing size
and checks that both backends return the same numbers.

    python benchmarks/bench_kernels.py [--repeat 20] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from hopf_conley import _kernels
from hopf_conley.hamiltonian import lift, small_spec


def _best_of(fn, repeat):
    fn()  # warm-up (includes numba compilation)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(sizes, repeat, m=1, n=2, seed=0):
    H = lift(small_spec(0.2, m, n))
    rng = np.random.default_rng(seed)
    rows = []
    for N in sizes:
        t = rng.uniform(size=N)
        X = rng.uniform(size=(N, 2 * m))
        Y = rng.standard_normal((N, 2 * n + 2))
        row = {"grid": N}
        for kind, method in (("eval", H.grid_eval), ("hessian", H.grid_hessian)):
            ref = method(t, X, Y, backend="numpy")
            got = method(t, X, Y, backend="numba")
            row[f"{kind}_max_diff"] = max(float(np.max(np.abs(a - b))) for a, b in zip(ref, got))
            for backend in ("numpy", "numba"):
                row[f"{kind}_{backend}_s"] = _best_of(
                    lambda b=backend: method(t, X, Y, backend=b), repeat)
            row[f"{kind}_speedup"] = row[f"{kind}_numpy_s"] / row[f"{kind}_numba_s"]
        rows.append(row)
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[36, 144, 1024, 8192])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--json", help="also write the rows as JSON")
    args = parser.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable: the 'numba' column times the uncompiled loops")
    rows = run(args.sizes, args.repeat)
    print(f"{'grid':>6} {'eval numpy':>12} {'eval numba':>12} {'x':>6} "
          f"{'hess numpy':>12} {'hess numba':>12} {'x':>6} {'max diff':>9}")
    for r in rows:
        diff = max(r["eval_max_diff"], r["hessian_max_diff"])
        print(f"{r['grid']:>6} {r['eval_numpy_s'] * 1e6:>10.1f}us {r['eval_numba_s'] * 1e6:>10.1f}us"
              f" {r['eval_speedup']:>6.1f} {r['hessian_numpy_s'] * 1e6:>10.1f}us"
              f" {r['hessian_numba_s'] * 1e6:>10.1f}us {r['hessian_speedup']:>6.1f} {diff:>9.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
