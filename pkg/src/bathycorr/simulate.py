"""Synthetic two-media scene generator: the ground-truth oracle.

Real through-water surveys pair a photogrammetric cloud with LiDAR truth;
here both sides are manufactured instead. Seabed points are sampled from an
analytic (or gridded) height field, and for each point the apparent position
is computed exactly the way a straight-ray multi-view intersection would
mis-place it:

1. for every selected camera, find the surface crossing of the *refracted*
   ray camera -> seabed point (Snell: sin(theta_air) = n * sin(theta_water),
   solved by bisection on the crossing abscissa, flat surface at z = 0);
2. extend the straight camera -> crossing ray underwater;
3. intersect all such rays in the least-squares sense.

The apparent point always comes out shallower than the true one for n > 1,
which is precisely the distortion the regression model corrects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import NumericalError
from .pointcloud import PointCloud, SpatialIndex

__all__ = [
    "PlaneSeabed",
    "SlopeSeabed",
    "SinusoidSeabed",
    "GridSeabed",
    "SimScene",
    "SimResult",
    "camera_grid",
    "refract_ray",
    "apparent_point",
    "simulate_scene",
    "add_noise",
]

DEFAULT_REFRACTIVE_INDEX = 1.34


# --------------------------------------------------------------------------
# seabed height fields


@dataclass(frozen=True)
class PlaneSeabed:
    """Flat seabed at constant depth (meters below surface, positive)."""

    depth: float
    domain: tuple[float, float, float, float] = (0.0, 100.0, 0.0, 100.0)

    def __post_init__(self):
        if not self.depth > 0:
            raise ValueError("depth must be positive (meters below surface)")
        _check_domain(self.domain)

    def z(self, x, y):
        return np.full_like(np.asarray(x, dtype=np.float64), -self.depth)

    def describe(self):
        return {"kind": "plane", "depth": self.depth, "domain": list(self.domain)}


@dataclass(frozen=True)
class SlopeSeabed:
    """Seabed deepening linearly along x from depth_from to depth_to."""

    depth_from: float
    depth_to: float
    domain: tuple[float, float, float, float] = (0.0, 200.0, 0.0, 100.0)

    def __post_init__(self):
        if not (self.depth_from > 0 and self.depth_to > 0):
            raise ValueError("depths must be positive (meters below surface)")
        _check_domain(self.domain)

    def z(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        x0, x1 = self.domain[0], self.domain[1]
        t = (x - x0) / (x1 - x0)
        return -(self.depth_from + (self.depth_to - self.depth_from) * t)

    def describe(self):
        return {
            "kind": "slope",
            "depth_from": self.depth_from,
            "depth_to": self.depth_to,
            "domain": list(self.domain),
        }


@dataclass(frozen=True)
class SinusoidSeabed:
    """Undulating seabed: depth = mean_depth + amplitude*sin(kx)*cos(ky)."""

    mean_depth: float
    amplitude: float
    wavelength: float
    domain: tuple[float, float, float, float] = (0.0, 100.0, 0.0, 100.0)

    def __post_init__(self):
        if not self.mean_depth > self.amplitude >= 0:
            raise ValueError("need mean_depth > amplitude >= 0 to stay submerged")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        _check_domain(self.domain)

    def z(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        k = 2.0 * np.pi / self.wavelength
        return -(self.mean_depth + self.amplitude * np.sin(k * x) * np.cos(k * y))

    def describe(self):
        return {
            "kind": "sinusoid",
            "mean_depth": self.mean_depth,
            "amplitude": self.amplitude,
            "wavelength": self.wavelength,
            "domain": list(self.domain),
        }


class GridSeabed:
    """Seabed sampled from an XYZ node file; nearest-node lookup.

    The height field is piecewise constant: each query takes the elevation
    of the planimetrically nearest grid node (deterministic, ties by lowest
    node ordinal). The domain is the node bounding box.
    """

    def __init__(self, nodes: PointCloud):
        if len(nodes) == 0:
            raise ValueError("grid seabed needs at least one node")
        self.nodes = nodes
        self._index = SpatialIndex(nodes)
        self.domain = (
            float(nodes.x.min()), float(nodes.x.max()),
            float(nodes.y.min()), float(nodes.y.max()),
        )
        _check_domain(self.domain)

    def z(self, x, y):
        idx, _ = self._index.nearest_many(
            np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
        )
        return self.nodes.z[idx]

    def describe(self):
        return {"kind": "grid", "nodes": len(self.nodes), "domain": list(self.domain)}


def _check_domain(domain):
    x0, x1, y0, y1 = domain
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate seabed domain {domain}")


def camera_grid(domain, spacing: float, height: float, margin: float | None = None):
    """Regular (m, 3) camera array over the domain plus a margin ring.

    The margin (default one spacing) keeps the outermost seabed points from
    only being seen obliquely from one side.
    """
    if not spacing > 0:
        raise ValueError("camera spacing must be positive")
    if not height > 0:
        raise ValueError("camera height must be positive")
    if margin is None:
        margin = spacing
    x0, x1, y0, y1 = domain
    xs = np.arange(x0 - margin, x1 + margin + 0.5 * spacing, spacing)
    ys = np.arange(y0 - margin, y1 + margin + 0.5 * spacing, spacing)
    gx, gy = np.meshgrid(xs, ys)
    out = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(height))])
    return np.ascontiguousarray(out)


# --------------------------------------------------------------------------
# scene + results


@dataclass(frozen=True)
class SimScene:
    """Cameras above a flat z=0 water surface, refractive index, seabed model."""

    cameras: np.ndarray
    seabed: object
    refractive_index: float = DEFAULT_REFRACTIVE_INDEX

    def __post_init__(self):
        cams = np.ascontiguousarray(np.asarray(self.cameras, dtype=np.float64))
        if cams.ndim != 2 or cams.shape[1] != 3:
            raise ValueError("cameras must be an (m, 3) array")
        if not np.isfinite(cams).all():
            raise ValueError("camera coordinates must be finite")
        if not (cams[:, 2] > 0).all():
            raise ValueError("all cameras must sit above the water surface (z > 0)")
        if not self.refractive_index >= 1.0:
            raise ValueError("refractive index must be >= 1")
        object.__setattr__(self, "cameras", cams)

    def describe(self):
        return {
            "cameras": int(self.cameras.shape[0]),
            "refractive_index": self.refractive_index,
            "seabed": self.seabed.describe(),
        }


@dataclass(frozen=True)
class SimResult:
    """Aligned true/apparent clouds plus per-point ray metadata."""

    true_cloud: PointCloud
    apparent_cloud: PointCloud
    incidence_sin: np.ndarray  # mean air-side sine of incidence per point
    n_views: np.ndarray
    residual_rms: np.ndarray  # LS ray-intersection residual per point

    def __post_init__(self):
        n = len(self.true_cloud)
        if len(self.apparent_cloud) != n:
            raise ValueError("true and apparent clouds must stay aligned")
        for name in ("incidence_sin", "n_views", "residual_rms"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per point")

    def __len__(self):
        return len(self.true_cloud)

    def to_samples(self, provenance: dict | None = None):
        """Aligned (z0, z) pairs as a SampleSet, bypassing cloud pairing."""
        from .pairing import SampleSet

        prov = {"source_image": self.apparent_cloud.label,
                "source_reference": self.true_cloud.label}
        if provenance:
            prov.update(provenance)
        return SampleSet.from_arrays(
            self.true_cloud.x, self.true_cloud.y,
            self.apparent_cloud.z, self.true_cloud.z, prov,
        )


# --------------------------------------------------------------------------
# ray operations


def _as_point(p, name, sign):
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.isfinite(p).all():
        raise ValueError(f"{name} must be finite")
    if sign > 0 and not p[2] > 0:
        raise ValueError(f"{name} must lie above the surface (z > 0)")
    if sign < 0 and not p[2] < 0:
        raise ValueError(f"{name} must lie below the surface (z < 0)")
    return p


def refract_ray(camera, seabed_point, n: float = DEFAULT_REFRACTIVE_INDEX):
    """Surface point where the camera->seabed ray bends (Snell's law).

    Solved by bisection along the planimetric camera->point segment; the
    Snell residual at the returned crossing is below 1e-9. ``n = 1``
    degenerates to the straight-line surface intersection.
    """
    cam = _as_point(camera, "camera", +1)
    pt = _as_point(seabed_point, "seabed_point", -1)
    if not n >= 1.0:
        raise ValueError("refractive index must be >= 1")
    s, _ = kernels.snell_crossings(cam.reshape(1, 3), pt.reshape(1, 3), float(n))
    dx = pt[0] - cam[0]
    dy = pt[1] - cam[1]
    r = np.hypot(dx, dy)
    frac = float(s[0]) / r if r > 0 else 0.0
    return np.array([cam[0] + dx * frac, cam[1] + dy * frac, 0.0])


def apparent_point(cameras, seabed_point, n: float = DEFAULT_REFRACTIVE_INDEX):
    """Where straight-ray multi-view intersection would place the point.

    Each camera contributes the un-refracted ray through its own surface
    crossing; the result is the least-squares closest point to all rays.
    Raises :class:`NumericalError` for a near-parallel (degenerate) bundle.
    """
    cams = np.ascontiguousarray(np.atleast_2d(np.asarray(cameras, dtype=np.float64)))
    if cams.shape[0] < 2 or cams.shape[1] != 3:
        raise ValueError("need at least 2 cameras")
    for row in cams:
        _as_point(row, "camera", +1)
    pt = _as_point(seabed_point, "seabed_point", -1)
    if not n >= 1.0:
        raise ValueError("refractive index must be >= 1")
    sel = np.arange(cams.shape[0], dtype=np.int64).reshape(1, -1)
    app, resid, _, ok = kernels.apparent_points(
        cams, sel, pt.reshape(1, 3), float(n)
    )
    if not ok[0]:
        raise NumericalError("degenerate ray bundle: rays are near-parallel")
    return app[0]


def simulate_scene(
    scene: SimScene, sample_count: int, seed: int, k_views: int = 2
) -> SimResult:
    """Sample the seabed uniformly (seeded) and compute apparent positions.

    Each point uses its ``k_views`` lowest-incidence cameras (ties broken by
    camera ordinal). Deterministic for identical scene, count and seed.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    m = scene.cameras.shape[0]
    if m < 2:
        raise ValueError("scene needs at least 2 cameras")
    if not 2 <= k_views <= m:
        raise ValueError(f"k_views must be in [2, {m}]")

    x0, x1, y0, y1 = scene.seabed.domain
    rng = np.random.default_rng(seed)
    xs = rng.uniform(x0, x1, sample_count)
    ys = rng.uniform(y0, y1, sample_count)
    zs = np.asarray(scene.seabed.z(xs, ys), dtype=np.float64)
    if not np.isfinite(zs).all() or not (zs < 0).all():
        raise ValueError("seabed model produced non-submerged elevations")

    pts = np.ascontiguousarray(np.column_stack([xs, ys, zs]))
    sel = kernels.select_cameras(
        scene.cameras, np.ascontiguousarray(pts[:, :2]), int(k_views)
    )
    app, resid, mean_sin, ok = kernels.apparent_points(
        scene.cameras, sel, pts, float(scene.refractive_index)
    )
    if not ok.all():
        raise NumericalError(
            f"{int((~ok).sum())} of {sample_count} ray bundles were degenerate"
        )
    if scene.refractive_index > 1.0 and not (app[:, 2] > pts[:, 2]).all():
        raise NumericalError("simulation violated the shallower-than-real invariant")

    return SimResult(
        true_cloud=PointCloud(pts, label="true"),
        apparent_cloud=PointCloud(app, label="apparent"),
        incidence_sin=mean_sin,
        n_views=np.full(sample_count, int(k_views), dtype=np.int64),
        residual_rms=resid,
    )


def add_noise(
    result: SimResult, sigma_z: float, outlier_rate: float, seed: int
) -> SimResult:
    """Degrade the apparent cloud: Gaussian z noise plus gross outliers.

    Outliers are Bernoulli-selected per point and replaced with
    refraction-impossible elevations — half at or below the true seabed
    (z0 <= z), half at or above the surface (z0 >= 0) — so the downstream
    physical filters have something to catch. ``sigma_z=0, outlier_rate=0``
    returns an identical result.
    """
    if sigma_z < 0:
        raise ValueError("sigma_z must be non-negative")
    if not 0.0 <= outlier_rate < 1.0:
        raise ValueError("outlier_rate must be in [0, 1)")
    n = len(result)
    rng = np.random.default_rng(seed)
    za = result.apparent_cloud.z.copy()
    if sigma_z > 0:
        za = za + rng.normal(0.0, sigma_z, n)
    if outlier_rate > 0:
        is_outlier = rng.random(n) < outlier_rate
        below = rng.random(n) < 0.5
        mag = rng.uniform(0.0, 1.0, n)
        zt = result.true_cloud.z
        sel_a = is_outlier & below
        sel_b = is_outlier & ~below
        za[sel_a] = zt[sel_a] - mag[sel_a]
        za[sel_b] = 0.5 * mag[sel_b]
    return SimResult(
        true_cloud=result.true_cloud,
        apparent_cloud=result.apparent_cloud.with_z(za),
        incidence_sin=result.incidence_sin,
        n_views=result.n_views,
        residual_rms=result.residual_rms,
    )
