#!/usr/bin/env python3
"""Side-by-side timing of the compiled and pure-numpy kernel backends.

The backend is chosen once at import time from the ORDVIEW_NUMBA environment
variable, so this script measures each backend in its own subprocess and
prints a comparison table. Warmup calls run before timing, which keeps numba
compilation latency out of the numbers.

Usage:
    python3 benchmarks/bench_kernels.py            # full comparison
    python3 benchmarks/bench_kernels.py --scale 0.1 --repeats 2   # quick look
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def build_workloads(scale: float):
    import numpy as np

    from ordview import _kernels as k
    from ordview.model import method_config, train
    from ordview.pipeline import SynthConfig, generate_synthetic

    rng = np.random.default_rng(0)
    n_lat = max(1000, int(200_000 * scale))
    n_soft = max(1000, int(100_000 * scale))
    j = 8

    latent = rng.normal(size=n_lat)
    thresholds = np.array([-1.0, 0.0, 1.5])
    upstream4 = rng.normal(size=(n_lat, 4))
    scores = rng.normal(size=(n_soft, j))
    probs = rng.dirichlet(np.ones(j), size=n_soft)
    targets = rng.dirichlet(np.ones(j), size=n_soft)
    labels = rng.integers(0, j, size=n_soft)

    data = generate_synthetic(SynthConfig(), seed=0)
    x = data.views["crown"]
    y = data.labels
    epochs = max(10, int(200 * scale))
    nominal = method_config("nominal", 4, epochs=epochs, seed=0)
    clm_slace = method_config("clm_slace", 4, epochs=epochs, seed=0)

    return [
        (f"clm_forward_batch {n_lat}x4",
         lambda: k.clm_forward_batch(latent, thresholds, k.LINK_LOGIT)),
        (f"clm_backward_batch {n_lat}x4",
         lambda: k.clm_backward_batch(latent, thresholds, k.LINK_LOGIT, upstream4)),
        (f"softmax_batch {n_soft}x{j}",
         lambda: k.softmax_batch(scores)),
        (f"loss_batch cce {n_soft}x{j}",
         lambda: k.loss_batch(probs, targets, labels, k.LOSS_CCE, 1.0)),
        (f"loss_batch cdwce {n_soft}x{j}",
         lambda: k.loss_batch(probs, targets, labels, k.LOSS_CDWCE, 1.0)),
        (f"loss_batch slace {n_soft}x{j}",
         lambda: k.loss_batch(probs, targets, labels, k.LOSS_SLACE, 1.0)),
        (f"train nominal 295x10 {epochs}ep",
         lambda: train(nominal, x, y)),
        (f"train clm_slace 295x10 {epochs}ep",
         lambda: train(clm_slace, x, y)),
    ]


def run_worker(scale: float, repeats: int) -> None:
    from ordview._backend import backend_name

    results = {}
    for name, fn in build_workloads(scale):
        fn()  # warmup; compiles the kernel on the numba path
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        results[name] = best
    print(json.dumps({"backend": backend_name(), "results": results}))


def run_comparison(scale: float, repeats: int) -> int:
    reports = {}
    for flag in ("1", "0"):
        env = dict(os.environ, ORDVIEW_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--scale", str(scale), "--repeats", str(repeats)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return proc.returncode
        reports[flag] = json.loads(proc.stdout.strip().splitlines()[-1])

    fast, slow = reports["1"], reports["0"]
    if fast["backend"] != "numba":
        print("note: numba unavailable, comparing the numpy path to itself")
    width = max(len(name) for name in slow["results"])
    print(f"{'workload':<{width}}  {fast['backend']:>10}  {slow['backend']:>10}"
          f"  {'speedup':>8}")
    for name, numpy_t in slow["results"].items():
        numba_t = fast["results"][name]
        ratio = numpy_t / numba_t if numba_t > 0 else float("inf")
        print(f"{name:<{width}}  {numba_t:>9.4f}s  {numpy_t:>9.4f}s"
              f"  {ratio:>7.1f}x")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scale", type=float, default=1.0,
                        help="workload size multiplier (default 1.0)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timed repetitions per workload, best kept")
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    if args.worker:
        run_worker(args.scale, args.repeats)
        return 0
    return run_comparison(args.scale, args.repeats)


if __name__ == "__main__":
    sys.exit(main())
