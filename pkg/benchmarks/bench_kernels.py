"""Time the hot kernels under both backends (numba vs pure numpy).

Runs itself twice in subprocesses, once per backend (the backend is
fixed at import time by GROUPLOSS_NO_NUMBA), and prints a comparison
table.  Numba timings exclude the one-off JIT compilation: kernels are
warmed up before measurement.

    python benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time

import numpy as np


def _workloads():
    rng = np.random.default_rng(0)
    n = 200_000
    s = np.sort(rng.uniform(size=n))
    y = (rng.uniform(size=n) < s).astype(np.float64)
    grid = np.linspace(0.0, 1.0, 1024)
    k = int(0.3 * n)

    X = rng.normal(size=(3300, 2))
    labels = (rng.uniform(size=3300) < 0.5).astype(np.float64)
    X_small = rng.normal(size=(60, 2))
    labels_small = (rng.uniform(size=60) < 0.5).astype(np.float64)

    v = rng.uniform(size=n)
    w = rng.uniform(0.5, 2.0, size=n)
    return (s, y, grid, k), (X, labels), (X_small, labels_small), (v, w)


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def worker():
    from grouploss import kernels
    from grouploss._backend import backend_name

    (s, y, grid, k), (X, labels), (Xs, labels_s), (v, w) = _workloads()

    # warm-up triggers JIT compilation on the numba path
    kernels.lowess_grid(s[:64], y[:64], grid[:4], 16)
    kernels.best_split(X[:64], labels[:64], 2)
    kernels.pav(v[:64], w[:64])

    timings = {
        "backend": backend_name(),
        "lowess_grid(200k pts, 1024 eval, 30% window)": _time(
            lambda: kernels.lowess_grid(s, y, grid, k)
        ),
        "best_split(3300x2, root node) x 100": _time(
            lambda: [kernels.best_split(X, labels, 2) for _ in range(100)]
        ),
        "best_split(60x2, leaf-sized node) x 3000": _time(
            lambda: [kernels.best_split(Xs, labels_s, 2) for _ in range(3000)]
        ),
        "pav(200k)": _time(lambda: kernels.pav(v, w)),
    }
    print(json.dumps(timings))


def compare():
    results = []
    for flag in ("0", "1"):
        env = dict(os.environ, GROUPLOSS_NO_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--worker"],
            env=env, capture_output=True, text=True, check=True,
        )
        results.append(json.loads(out.stdout.strip().splitlines()[-1]))
    names = [k for k in results[0] if k != "backend"]
    width = max(len(n) for n in names)
    print(f"{'kernel':<{width}}  {results[0]['backend']:>10}  {results[1]['backend']:>10}  speedup")
    for name in names:
        a, b = results[0][name], results[1][name]
        print(f"{name:<{width}}  {a:>9.4f}s  {b:>9.4f}s  {b / a:>6.2f}x")


if __name__ == "__main__":
    if "--worker" in sys.argv:
        worker()
    else:
        compare()
