"""Compare the numba and numpy kernels.

    python benchmarks/bench_kernels.py [--repeat R] [--quick]

Times the Hamiltonian stencil and the mask rasterizer on a few grid sizes
and prints one row per (kernel, size) with both timings and the speedup.
"""
import argparse
import timeit

import numpy as np

from ucplab import _kernels
from ucplab import geometry as geo
from ucplab.hamiltonian import Grid

SIZES = {"stencil": [(1, 100_000), (2, 400), (3, 64)], "rasterize": [(1, 100_000), (2, 400), (3, 48)]}
QUICK = {"stencil": [(1, 1000), (2, 30)], "rasterize": [(1, 1000), (2, 30)]}


def _stencil_case(d, n):
    rng = np.random.default_rng(0)
    u = rng.standard_normal((n,) * d)
    v = rng.standard_normal((n,) * d)
    return (lambda: _kernels.hamiltonian_apply_numpy(u, v, 1.0)), (lambda: _kernels.hamiltonian_apply_numba(u, v, 1.0))


def _raster_case(d, n):
    grid = Grid(d, 20.0, n)
    Z = geo.make_perturbed_sequence(d, 1.0, 0.2, geo.window_for_grid(grid, 1.0), seed=0)
    args = (np.tile(grid.axis, (d, 1)), np.asarray(Z.window.lo), np.asarray(Z.window.shape), Z.centers, Z.M, Z.delta)
    return (lambda: _kernels.rasterize_numpy(*args)), (lambda: _kernels.rasterize_numba(*args))


def best_of(fn, repeat):
    fn()  # warm up (and JIT compile)
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="tiny sizes, for smoke tests")
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    sizes = QUICK if args.quick else SIZES
    rows = []
    print(f"{'kernel':<10} {'d':>2} {'n':>7} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for kernel, make in (("stencil", _stencil_case), ("rasterize", _raster_case)):
        for d, n in sizes[kernel]:
            f_np, f_nb = make(d, n)
            t_np, t_nb = best_of(f_np, args.repeat), best_of(f_nb, args.repeat)
            rows.append((kernel, d, n, t_np, t_nb))
            print(f"{kernel:<10} {d:>2} {n:>7} {t_np * 1e3:>11.3f} {t_nb * 1e3:>11.3f} {t_np / t_nb:>8.2f}")
    return rows


if __name__ == "__main__":
    main()
