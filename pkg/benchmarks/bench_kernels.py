"""Time the numba kernels against the numpy fallback.

Both matrix kernels are dominated by Bessel evaluations.

    python benchmarks/bench_kernels.py [--n 100] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from gpmisspec.covkernel import correlation_matrix, cross_correlation


def best_of(fn, repeat):
    fn()  # warm-up, includes jit compilation or cache load
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--m", type=int, default=2000, help="quadrature nodes")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    pts = rng.uniform(0, args.n, size=(args.n, 1))
    nodes = rng.uniform(0, args.n, size=(args.m, 1))

    cases = {
        f"correlation_matrix n={args.n}": (
            lambda: correlation_matrix(pts, 3.0, 10.0, use_numba=True),
            lambda: correlation_matrix(pts, 3.0, 10.0, use_numba=False),
        ),
        f"cross_correlation {args.m}x{args.n}": (
            lambda: cross_correlation(nodes, pts, 3.0, 10.0, use_numba=True),
            lambda: cross_correlation(nodes, pts, 3.0, 10.0, use_numba=False),
        ),
    }
    print(f"{'kernel':38s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for name, (fast, slow) in cases.items():
        tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:38s} {1e3 * tf:11.2f} {1e3 * ts:11.2f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
