"""Compiled vs pure-Python crossing-time kernel.

    python3 benchmarks/bench_walk.py --level 3 --trials 100000

Both backends consume the same per-trial streams, so the step counts are
checked for equality before timings are reported.
"""

import argparse
import time

import numpy as np

from gsc_dw import kernels
from gsc_dw.gsc_core import menger_sponge, sierpinski_carpet
from gsc_dw.scaling import random_walk_crossing


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--spec", choices=("sc", "menger"), default="sc")
    ap.add_argument("--level", type=int, default=3)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec = sierpinski_carpet() if args.spec == "sc" else menger_sponge()
    run = lambda backend: random_walk_crossing(spec, args.level, args.trials, args.seed, backend=backend)
    print(f"{args.spec} level {args.level}, {args.trials} trials, best of {args.repeat}")

    t_py, py = timed(lambda: run("python"), args.repeat)
    print(f"  python   {t_py:8.3f} s  mean {py.mean:.4f}")
    if kernels.BACKEND == "python":
        print("  compiled kernel not built; only the fallback was timed")
        return
    t_c, native = timed(lambda: run(None), args.repeat)
    assert np.array_equal(py.steps, native.steps), "backends disagree"
    print(f"  {kernels.BACKEND:8s} {t_c:8.3f} s  mean {native.mean:.4f}")
    print(f"  speedup  {t_py / t_c:8.1f}x  (identical step counts)")


if __name__ == "__main__":
    main()
