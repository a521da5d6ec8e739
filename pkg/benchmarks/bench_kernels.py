"""Benchmark the compiled cube-sweep kernels against the NumPy fallback.

Run from the repository root after an editable install:

    python3 benchmarks/bench_kernels.py [--sizes 16 32 64] [--q 1.0]

Reports per-backend wall time for a full all-cubes seminorm sweep of a
random matrix field (the hot loop of the Korn searches and the strain-
distance bisections).
"""

import argparse
import time

import numpy as np

from oscilab import kernels
from oscilab.grid import Field, Grid


def sweep_time(impl, grid, vals, q, repeats=3):
    best = float("inf")
    sweep = impl.osc_sweep_2d if grid.n == 2 else impl.osc_sweep_3d
    for _ in range(repeats):
        t0 = time.perf_counter()
        total = 0.0
        for side in range(1, min(grid.cells) + 1):
            valid = np.ascontiguousarray(grid.valid_anchor_mask(side), dtype=np.uint8)
            osc = sweep(vals, valid, side, q)
            total = max(total, float(osc.max()))
        best = min(best, time.perf_counter() - t0)
    return best, total


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    parser.add_argument("--q", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"active backend: {kernels.backend()}")
    header = f"{'grid':>8} {'q':>4} {'numpy [s]':>12} {'compiled [s]':>13} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for size in args.sizes:
        grid = Grid((size, size), h=1.0 / size)
        field = Field(grid, "cell", "matrix", rng.normal(size=(size, size, 2, 2)))
        vals = np.ascontiguousarray(field.flat_components())
        t_ref, v_ref = sweep_time(kernels.reference(), grid, vals, args.q)
        if kernels.backend() == "compiled":
            t_fast, v_fast = sweep_time(kernels, grid, vals, args.q)
            if abs(v_ref - v_fast) > 1e-10 * max(abs(v_ref), 1.0):
                raise AssertionError("backends disagree on the sweep supremum")
            print(f"{size:>6}^2 {args.q:>4g} {t_ref:>12.4f} {t_fast:>13.4f} "
                  f"{t_ref / t_fast:>8.1f}x")
        else:
            print(f"{size:>6}^2 {args.q:>4g} {t_ref:>12.4f} {'-':>13} {'-':>9}")


if __name__ == "__main__":
    main()
