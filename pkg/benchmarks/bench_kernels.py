#!/usr/bin/env python3
"""Benchmark the compiled bit-kernels against the numpy fallback.

Times the raw kernels (which in the fallback unpack per call), the
cached operator path the solvers actually use, and a desk-scale TV
solve under each backend. Run after building the extension:

    python benchmarks/bench_kernels.py [--large]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cdm import Grid2D, gaussian_state, generate_masks, simulate_analytic
from cdm._kernels import _bitops_py
from cdm.linop import MaskOperator
from cdm.recovery import TvParams, tv_admm_recover

try:
    from cdm._kernels import _bitops
except ImportError:
    _bitops = None


def timeit(fn, min_time=0.2):
    fn()  # warm up
    reps = 0
    t0 = time.perf_counter()
    while time.perf_counter() - t0 < min_time:
        fn()
        reps += 1
    return (time.perf_counter() - t0) / reps


def bench_kernels(grid: Grid2D, m: int) -> None:
    masks = generate_masks(m, grid, 0.5, seed=42)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    print(f"\n== kernels at m={m}, n={grid.n} ==")
    header = f"{'kernel':<14}{'python':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    rows = [
        ("q_matvec", lambda im: im.q_matvec(masks.packed, masks.n, x)),
        ("qt_matvec", lambda im: im.qt_matvec(masks.packed, masks.n, y)),
        ("row_popcounts", lambda im: im.row_popcounts(masks.packed, masks.n)),
    ]
    for name, call in rows:
        t_py = timeit(lambda: call(_bitops_py))
        if _bitops is None:
            print(f"{name:<14}{t_py * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
            continue
        t_c = timeit(lambda: call(_bitops))
        print(f"{name:<14}{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
              f"{t_py / t_c:>9.1f}x")

    print(f"\n== cached operator path (what the solvers use) ==")
    for backend in ("python",) + (("compiled",) if _bitops else ()):
        op = MaskOperator(masks, backend=backend)
        t_mv = timeit(lambda: op.matvec(x))
        t_rmv = timeit(lambda: op.rmatvec(y))
        print(f"{backend:<10} matvec {t_mv * 1e3:7.2f}ms   "
              f"rmatvec {t_rmv * 1e3:7.2f}ms")


def bench_solve() -> None:
    grid = Grid2D(12, 16)
    state = gaussian_state(grid, 4.0)
    masks = generate_masks(48, grid, 0.5, seed=7)
    record = simulate_analytic(state, masks, alpha=np.deg2rad(20.0))
    params = TvParams(tol=1e-4)
    print(f"\n== desk-scale TV solve (n={grid.n}, m=48) ==")
    import cdm.linop as linop_mod

    for backend in ("python",) + (("compiled",) if _bitops else ()):
        orig = linop_mod.MaskOperator

        class Pinned(orig):  # pin the backend choice for this run
            def __init__(self, matrix, backend=backend):
                super().__init__(matrix, backend=backend)

        linop_mod.MaskOperator = Pinned
        try:
            import cdm.recovery as recovery_mod
            recovery_mod.MaskOperator = Pinned
            t = timeit(lambda: tv_admm_recover(record, params), min_time=1.0)
        finally:
            linop_mod.MaskOperator = orig
            recovery_mod.MaskOperator = orig
        print(f"{backend:<10} {t * 1e3:8.1f} ms per solve")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--large", action="store_true",
                    help="also benchmark the 19200-pixel preset scale")
    args = ap.parse_args()
    if _bitops is None:
        print("compiled extension not importable; timing fallback only")
    bench_kernels(Grid2D(12, 16), m=48)
    if args.large:
        bench_kernels(Grid2D(120, 160), m=3840)
    bench_solve()


if __name__ == "__main__":
    main()
