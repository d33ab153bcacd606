"""Benchmark the compiled lattice kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--n-points N] [--repeats R]
"""
import argparse
import time

import numpy as np

from rieszwave._kernels import _fallback

try:
    from rieszwave._kernels import _speedups
except ImportError:
    _speedups = None


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-points", type=int, default=1500)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.n_points
    coords = rng.uniform(0.0, 4.0, size=(n, 3))
    values = rng.standard_normal(n)
    points = np.column_stack([rng.uniform(0.0, 1.0, size=(n, 1)), coords])

    cases = [
        ("riesz_double_sum", (values, coords, 4.0, 1.0, 0.0)),
        ("gagliardo_double_sum", (values, coords, 4.0, 0.3, 4.0)),
        ("holder_max_ratio", (values, points, 0.3, 1e-9, 1e18)),
    ]

    print(f"n_points={n}, repeats={args.repeats} (best-of)")
    print(f"{'kernel':<22}{'fallback [s]':>14}{'compiled [s]':>14}{'speedup':>10}")
    for name, call_args in cases:
        t_py = _time(getattr(_fallback, name), *call_args, repeats=args.repeats)
        if _speedups is None:
            print(f"{name:<22}{t_py:>14.4f}{'n/a':>14}{'n/a':>10}")
            continue
        t_c = _time(getattr(_speedups, name), *call_args, repeats=args.repeats)
        print(f"{name:<22}{t_py:>14.4f}{t_c:>14.4f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
