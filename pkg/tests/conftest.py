"""Shared fixtures and brute-force oracles used across the test modules."""

import numpy as np
import pytest

from bathycorr.pointcloud import PointCloud


def linear_scan_nearest(xs, ys, qx, qy):
    """Reference nearest-neighbour: full scan, first index on ties."""
    d2 = (xs - qx) ** 2 + (ys - qy) ** 2
    i = int(np.argmin(d2))  # argmin returns the first minimiser
    return i, float(d2[i])


def linear_scan_radius(xs, ys, qx, qy, r):
    """Reference radius query: ascending indices, boundary inclusive."""
    d2 = (xs - qx) ** 2 + (ys - qy) ** 2
    return np.flatnonzero(d2 <= r * r)


def make_random_cloud(rng, n, span=50.0, dup_fraction=0.0):
    """Random planimetric cloud; optionally duplicate a slice of points."""
    xs = rng.uniform(0.0, span, n)
    ys = rng.uniform(0.0, span * 0.5 + 1.0, n)
    if dup_fraction > 0.0 and n >= 4:
        k = max(1, int(n * dup_fraction))
        src = rng.integers(0, n - k, k)
        xs[n - k:] = xs[src]
        ys[n - k:] = ys[src]
    zs = rng.uniform(-10.0, -1.0, n)
    return PointCloud(np.column_stack([xs, ys, zs]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
