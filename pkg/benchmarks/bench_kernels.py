"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--sizes 64 1024 16384] [--repeat 5]

Prints one row per (kernel, size) with the best-of-``repeat`` time per call
for each backend and the speedup. Outputs of both backends are checked for
bit equality before timing.
"""
import argparse
import timeit

import numpy as np

from tsavg import _kernels_py

try:
    from tsavg import _kernels as compiled
except ImportError:
    compiled = None


def cases(n, rng):
    values = np.ascontiguousarray(rng.normal(size=(n, 2)))
    weights = rng.uniform(0.0, 1.0, n)
    mu = rng.uniform(0.0, 0.01, n)
    coef = rng.uniform(-1.0, 1.0, n)
    path = np.ascontiguousarray(rng.uniform(-1.0, 1.0, n))
    return {
        "compensated_dot": lambda m: m.compensated_dot(values, weights),
        "linear_steps": lambda m: m.linear_steps(mu, coef, 1.0),
        "first_exit": lambda m: m.first_exit(path, -2.0, 2.0),
    }


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 1024, 16384])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the pure-Python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'n':>8}{'python [s]':>14}{'compiled [s]':>14}{'speedup':>10}")
    for n in args.sizes:
        for name, call in cases(n, rng).items():
            py = best_time(lambda: call(_kernels_py), args.repeat)
            if compiled is None:
                print(f"{name:<16}{n:>8}{py:>14.3e}{'-':>14}{'-':>10}")
                continue
            a, b = np.asarray(call(compiled)), np.asarray(call(_kernels_py))
            if a.tobytes() != b.tobytes():
                raise SystemExit(f"{name}: backends disagree at n={n}")
            cy = best_time(lambda: call(compiled), args.repeat)
            print(f"{name:<16}{n:>8}{py:>14.3e}{cy:>14.3e}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
