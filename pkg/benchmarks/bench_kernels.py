#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--rows N] [--cells N] [--repeat K]

The same kernels power index initialization (binning + per-tile moments) and
region filtering; this compares the two dispatch paths directly, so it works
regardless of the AQTILE_DISABLE_NUMBA setting.
"""

import argparse
import time

import numpy as np

from aqtile import kernels


def bench(label, fn, args, repeat):
    fn(*args)  # warm-up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter_ns()
        fn(*args)
        best = min(best, time.perf_counter_ns() - t0)
    print(f"  {label:<14} {best / 1e6:9.3f} ms")
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=2_000_000)
    parser.add_argument("--cells", type=int, default=10_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    ax = rng.uniform(0, 1000, args.rows)
    ay = rng.uniform(0, 1000, args.rows)
    values = rng.uniform(0, 1000, args.rows)
    side = int(np.sqrt(args.cells))
    x_edges = np.linspace(0.0, np.nextafter(1000.0, np.inf), side + 1)
    y_edges = np.linspace(0.0, np.nextafter(1000.0, np.inf), side + 1)
    cells = kernels.grid_cell_ids_numpy(ax, ay, x_edges, y_edges)

    if not kernels.NUMBA_ENABLED:
        print("note: numba unavailable or disabled; timing numpy path only")

    print(f"rows={args.rows:,} cells={side * side} repeat={args.repeat} (best of)")
    suites = [
        ("grid_cell_ids", (ax, ay, x_edges, y_edges),
         kernels.grid_cell_ids_numpy,
         kernels.grid_cell_ids_numba if kernels.NUMBA_ENABLED else None),
        ("region_mask", (ax, ay, 250.0, 750.0, 100.0, 400.0),
         kernels.region_mask_numpy,
         kernels.region_mask_numba if kernels.NUMBA_ENABLED else None),
        ("group_moments", (cells, values, side * side),
         kernels.group_moments_numpy,
         kernels.group_moments_numba if kernels.NUMBA_ENABLED else None),
    ]
    for name, call_args, numpy_fn, numba_fn in suites:
        print(f"{name}:")
        t_np = bench("numpy", numpy_fn, call_args, args.repeat)
        if numba_fn is not None:
            t_nb = bench("numba", numba_fn, call_args, args.repeat)
            print(f"  {'speedup':<14} {t_np / t_nb:9.2f} x")


if __name__ == "__main__":
    main()
