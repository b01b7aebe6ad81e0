"""Time the GLM solver under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--repeats 5] [--quick]

Each case runs the fixed-schedule l1 correction (8000 iterations unless the
stopping rule fires first) and the line-search MLE on a synthetic logistic
problem.  The numba kernels are compiled once before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from l1tcl import _kernels
from l1tcl.glm import GlmFit, LinkKind, SolverConfig, fit_l1_deviation, fit_mle
from l1tcl.synthetic import generate_grid_instance


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small cases only")
    args = ap.parse_args(argv)
    cases = [(10, 100), (20, 500)] if args.quick else [(10, 100), (20, 500), (50, 2000), (100, 5000)]
    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'d':>4} {'n':>6} {'solve':<12} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'max |diff|':>11}")
    for d, n in cases:
        domains, _ = generate_grid_instance(d, min(3, d), n, 2000, seed=0)
        target = domains.target
        ref = GlmFit(LinkKind.SIGMOID, np.zeros(d))
        solves = {
            "l1-deviation": lambda: fit_l1_deviation(target, "treatment", "sigmoid", ref,
                                                     SolverConfig(lam=0.01))[0],
            "mle": lambda: fit_mle(target, "treatment", "sigmoid")[0].coefficients,
        }
        for name, fn in solves.items():
            out = {}
            times = {}
            for be in ("numba", "numpy"):
                _kernels.set_backend(be)
                out[be] = fn()  # warm-up (and JIT compile)
                times[be] = _time(fn, args.repeats)
            diff = float(np.max(np.abs(out["numba"] - out["numpy"])))
            print(f"{d:>4} {n:>6} {name:<12} {times['numba']:>9.4f} {times['numpy']:>9.4f} "
                  f"{times['numpy'] / times['numba']:>7.1f}x {diff:>11.2e}")
    _kernels.set_backend("numba")


if __name__ == "__main__":
    main()
