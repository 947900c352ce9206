"""Time the compiled kernels against the numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 5]``.
Prints the best wall time per call for each backend and the speed-up.
"""

import argparse
import timeit

import numpy as np

from aximhd.kernels import backend_module


def tridiag_case(n, rng):
    m = n // 2 + 1
    lower = rng.uniform(-1, 1, n)
    lower[0] = 0.0
    upper = rng.uniform(-1, 1, n)
    diag = 3.0 + rng.uniform(0, 1, (n, m))
    cprime = np.empty_like(diag)
    inv_den = np.empty_like(diag)
    inv_den[0] = 1.0 / diag[0]
    cprime[0] = upper[0] * inv_den[0]
    for i in range(1, n):
        inv_den[i] = 1.0 / (diag[i] - lower[i] * cprime[i - 1])
        cprime[i] = upper[i] * inv_den[i]
    rhs = np.ascontiguousarray(rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))
    out = np.empty_like(rhs)
    return lambda mod: mod.tridiag_solve(lower, cprime, inv_den, rhs, out)


def advection_case(n, rng):
    f, ur, uz = (rng.standard_normal((n, n)) for _ in range(3))
    out = np.empty_like(f)
    return lambda mod: mod.limited_advection(f, ur, uz, 4.0 / n, 6.28 / n, 1.0, out)


def best_time(call, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(call, number=1), 1e-7)))
    return min(timeit.repeat(call, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        backends = {"python": backend_module("python"), "cython": backend_module("cython")}
    except ImportError:
        backends = {"python": backend_module("python")}
        print("compiled extension unavailable; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'N':>6}" + "".join(f"{b:>14}" for b in backends) + f"{'speed-up':>11}")
    for name, make in (("tridiag_solve", tridiag_case), ("limited_advection", advection_case)):
        for n in args.sizes:
            case = make(n, rng)
            times = {b: best_time(lambda m=mod: case(m), args.repeat)
                     for b, mod in backends.items()}
            cells = "".join(f"{times[b] * 1e3:>12.3f}ms" for b in backends)
            ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{name:<18}{n:>6}{cells}{ratio:>10.1f}x")


if __name__ == "__main__":
    main()
