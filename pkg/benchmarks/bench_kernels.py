#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback.

Imports both implementation modules directly (ignoring BATHYCORR_NUMBA), runs
each hot kernel on the same synthetic workload, and prints per-kernel
timings. The first numba call of each kernel triggers (cached) JIT
compilation, so every kernel is warmed once before timing.

Usage: python3 benchmarks/bench_kernels.py [--points 50000] [--queries 20000]
"""

import argparse
import time

import numpy as np

from bathycorr import _kernels_numba as knb
from bathycorr import _kernels_numpy as knp
from bathycorr.pointcloud import PointCloud, _build_grid
from bathycorr.simulate import camera_grid


def _timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=50000)
    ap.add_argument("--queries", type=int, default=20000)
    args = ap.parse_args()

    rng = np.random.default_rng(42)
    n, m = args.points, args.queries
    domain = (0.0, 200.0, 0.0, 100.0)
    xs = rng.uniform(domain[0], domain[1], n)
    ys = rng.uniform(domain[2], domain[3], n)
    zs = -(1.0 + 13.8 * (xs - domain[0]) / (domain[1] - domain[0]))
    cloud = PointCloud(np.column_stack([xs, ys, zs]))
    g = _build_grid(cloud.x.copy(), cloud.y.copy())
    gargs = (g.xs, g.ys, g.order, g.cell_start, g.nx, g.ny, g.x0, g.y0, g.cell)

    qx = rng.uniform(domain[0] - 5, domain[1] + 5, m)
    qy = rng.uniform(domain[2] - 5, domain[3] + 5, m)

    cams = camera_grid(domain, 10.0, 100.0)
    pts = np.ascontiguousarray(cloud.xyz)
    pts_xy = np.ascontiguousarray(pts[:, :2])
    core = np.ascontiguousarray(pts[: min(n, 20000)])
    normals = np.zeros((core.shape[0], 3))
    normals[:, 2] = 1.0
    zcol = np.ascontiguousarray(cloud.z)

    sel = knb.select_cameras(cams, pts_xy, 2)  # shared input for both paths

    bench = [
        ("nearest_batch", lambda k: k.nearest_batch(*gargs, qx, qy)),
        ("radius_query x200", lambda k: [
            k.radius_query(*gargs, qx[i], qy[i], 2.5) for i in range(200)
        ]),
        ("m3c2_project", lambda k: k.m3c2_project(
            g.xs, g.ys, zcol, g.order, g.cell_start, g.nx, g.ny, g.x0, g.y0,
            g.cell, core, normals, 1.0, 20.0,
        )),
        ("select_cameras", lambda k: k.select_cameras(cams, pts_xy, 2)),
        ("apparent_points", lambda k: k.apparent_points(cams, sel, pts, 1.34)),
    ]

    print(f"workload: {n} points, {m} queries, {cams.shape[0]} cameras")
    print(f"{'kernel':<18} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for name, fn in bench:
        fn(knb)  # warm-up / JIT
        t_nb = _timeit(lambda: fn(knb))
        t_np = _timeit(lambda: fn(knp))
        print(f"{name:<18} {t_nb:>9.4f}s {t_np:>9.4f}s {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
