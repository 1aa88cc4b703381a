#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot kernels directly (both backends imported side by side) and
one end-to-end sampling run per backend via subprocesses with SDEDIT_BACKEND
set, since the flag is read at import time.

Usage: python bench/bench_backends.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sdedit import _kernels_numpy  # noqa: E402

try:
    from sdedit import _kernels_numba

    HAVE_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAVE_NUMBA = False


def timeit(fn, repeats=5):
    fn()  # warm-up (and JIT compile)
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_gmm_score(quick):
    rng = np.random.default_rng(0)
    cases = [(100_000, 3, 2), (50_000, 5, 16), (5_000, 3, 3072)]
    if quick:
        cases = cases[:2]
    for b, k, d in cases:
        x = rng.normal(size=(b, d))
        means = rng.normal(size=(k, d))
        inv_var = rng.uniform(0.5, 2.0, size=k)
        logw = np.full(k, -np.log(k)) - 0.5 * d * np.log(2 * np.pi / inv_var)
        t_np = timeit(lambda: _kernels_numpy.gmm_score(x, means, inv_var, logw))
        row = f"gmm_score  B={b:<7} K={k} d={d:<5} numpy {t_np * 1e3:8.2f} ms"
        if HAVE_NUMBA:
            t_nb = timeit(lambda: _kernels_numba.gmm_score(x, means, inv_var, logw))
            row += f"   numba {t_nb * 1e3:8.2f} ms   speedup {t_np / t_nb:5.1f}x"
        print(row)


def bench_median(quick):
    rng = np.random.default_rng(1)
    cases = [(64, 7), (256, 23)]
    if quick:
        cases = cases[:1]
    for size, kernel in cases:
        img = rng.random((size, size))
        t_np = timeit(lambda: _kernels_numpy.median_filter_2d(img, kernel), 3)
        row = f"median     {size}x{size} k={kernel:<3}      numpy {t_np * 1e3:8.2f} ms"
        if HAVE_NUMBA:
            t_nb = timeit(lambda: _kernels_numba.median_filter_2d(img, kernel), 3)
            row += f"   numba {t_nb * 1e3:8.2f} ms   speedup {t_np / t_nb:5.1f}x"
        print(row)


END_TO_END = """
import time
import numpy as np
import sdedit as sd

gmm = sd.GmmSpec([0.5, 0.3, 0.2], [[0.0, 2.0], [-2.0, -1.0], [2.0, -1.0]],
                 [0.30, 0.25, 0.35])
ve = sd.VeSchedule(0.01, 25.0)
score = sd.AnalyticGmmScore(gmm, ve)
cfg = sd.SdeditConfig(t0=1.0, n_steps={steps}, seed=3)
sd.sdedit(np.zeros((2000, 2)), score, ve, cfg)  # warm-up
t = time.perf_counter()
sd.sdedit(np.zeros(({batch}, 2)), score, ve, cfg)
print(f"{{time.perf_counter() - t:.3f}}")
"""


def bench_end_to_end(quick):
    batch, steps = (10_000, 100) if quick else (20_000, 500)
    code = END_TO_END.format(batch=batch, steps=steps)
    times = {}
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    for backend in backends:
        env = dict(os.environ, SDEDIT_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        times[backend] = float(out.stdout.strip().splitlines()[-1])
    row = f"sdedit     B={batch} N={steps}  numpy {times['numpy']:8.3f} s"
    if "numba" in times:
        row += (f"    numba {times['numba']:8.3f} s"
                f"    speedup {times['numpy'] / times['numba']:5.1f}x")
    print(row)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller cases")
    args = parser.parse_args()
    if not HAVE_NUMBA:
        print("numba not importable; showing numpy timings only")
    bench_gmm_score(args.quick)
    bench_median(args.quick)
    bench_end_to_end(args.quick)


if __name__ == "__main__":
    main()
