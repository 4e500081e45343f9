"""Time the compiled core against the numpy fallback.

    python benchmarks/bench_core.py [--repeat 3] [--starts 10000]
"""
import argparse
import time

import numpy as np

from dkglab import _pycore
from dkglab.backend import compiled_core


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--starts", type=int, default=10_000)
    ap.add_argument("--d2-grid", type=int, default=2000)
    ap.add_argument("--d3-grid", type=int, default=200)
    args = ap.parse_args(argv)

    ext = compiled_core()
    if ext is None:
        print("compiled core not built; only the numpy timings are shown")
    starts = np.random.default_rng(0).uniform(-15, 15, size=(args.starts, 3))
    cases = [
        (f"newton_appendix x{args.starts}", lambda m: m.newton_appendix(starts)),
        (f"d2_scan({args.d2_grid})", lambda m: m.d2_scan(args.d2_grid)),
        (f"d3_scan({args.d3_grid})", lambda m: m.d3_scan(args.d3_grid)),
    ]
    print(f"{'case':<28}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, fn in cases:
        tp, _ = best_of(lambda: fn(_pycore), args.repeat)
        if ext is None:
            print(f"{name:<28}{tp:>12.3f}{'-':>12}{'-':>10}")
            continue
        tc, _ = best_of(lambda: fn(ext), args.repeat)
        print(f"{name:<28}{tp:>12.3f}{tc:>12.3f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
