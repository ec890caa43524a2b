"""Compare the compiled and pure-Python Jacobi SVD kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 3,4,6] [--batch 2000] [--repeat 5]

Prints one line per matrix size with the best-of-``repeat`` wall time of each
backend, the speedup, and the largest disagreement between their log singular values.
"""

import argparse
import time

import numpy as np

from regulus.kernels import compiled_available, jacobi_svd_batch


def best_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="3,4,6")
    p.add_argument("--batch", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not compiled_available():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    print(f"{'d':>3} {'batch':>6} {'cython [s]':>11} {'python [s]':>11} {'speedup':>8} {'max diff':>9}")
    for d in (int(s) for s in args.sizes.split(",")):
        mats = np.eye(d) + rng.standard_normal((args.batch, d, d))
        t_c = best_time(lambda: jacobi_svd_batch(mats, backend="cython"), args.repeat)
        t_p = best_time(lambda: jacobi_svd_batch(mats, backend="python"), args.repeat)
        # the kernels return log singular values
        log_c = jacobi_svd_batch(mats, backend="cython")[1]
        log_p = jacobi_svd_batch(mats, backend="python")[1]
        diff = float(np.abs(log_c - log_p).max())
        print(f"{d:>3} {args.batch:>6} {t_c:>11.4f} {t_p:>11.4f} {t_p / t_c:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
