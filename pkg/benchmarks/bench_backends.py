"""Time the compiled and numpy kernel-sum backends on the same inputs.

    python benchmarks/bench_backends.py [--sizes 500 2000 8000] [--repeat 3]

Reports the best wall time per call, nanoseconds per kernel pair, the
speedup of the compiled core and the relative difference of the two results.
"""

import argparse
import time

import numpy as np

from kme_dyn import _backend, _pykernels
from kme_dyn.kernels import Gaussian, Polynomial


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = _backend.available()
    if len(backends) < 2:
        print("compiled extension not built; only the numpy fallback is available")
    g = np.random.default_rng(0)
    header = "%-14s %6s %-7s %10s %9s %8s %9s" % (
        "kernel", "n", "path", "backend", "ms/call", "ns/pair", "speedup")
    print(header)
    print("-" * len(header))
    for kernel in (Gaussian(0.5), Polynomial(3)):
        for n in args.sizes:
            X = g.normal(size=(n, args.dim))
            Y = g.normal(size=(n, args.dim))
            a, b = g.normal(size=n), g.normal(size=n)
            for path, sym, Y_ in (("cross", False, Y), ("self", True, X)):
                pairs = n * n if not sym else n * (n + 1) // 2
                ref_time = None
                results = []
                for mod in backends:
                    sec, val = best_time(lambda: mod.weighted_sum(
                        X, a, Y_, b, kernel._code, kernel._param, sym), args.repeat)
                    results.append(val)
                    if mod is _pykernels:
                        ref_time = sec
                    speed = "" if mod is _pykernels else "%8.1fx" % (ref_time / sec)
                    print("%-14s %6d %-7s %10s %9.2f %8.2f %9s" % (
                        kernel.label, n, path, mod.NAME, 1e3 * sec, 1e9 * sec / pairs, speed))
                if len(results) > 1:
                    rel = abs(results[1] - results[0]) / max(abs(results[0]), 1e-300)
                    print("%-14s %6s %-7s %10s rel diff %.1e" % ("", "", "", "", rel))


if __name__ == "__main__":
    main()
