"""Correction quality metrics: M3C2 distances, R² fitting score, sections.

M3C2 here is the core of the published method: at each core point, points of
either cloud falling inside a cylinder (axis = local normal, diameter ``d``,
half-length ``max_depth``) are projected onto the axis, and the signed
distance is mean(compared) − mean(reference). With the default vertical
normals, positive distance means the compared cloud sits above (shallower
than) the reference — the signature of uncorrected refraction.

The level-of-detection/uncertainty half of the published M3C2 is out of
scope; only distances and aggregate statistics are computed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import kernels
from .errors import NumericalError
from .pointcloud import PointCloud, SpatialIndex, _build_grid

__all__ = [
    "M3c2Params",
    "DistanceStats",
    "ComparisonReport",
    "SectionProfile",
    "m3c2_distance",
    "distance_stats",
    "fitting_score",
    "extract_section",
    "write_distances_csv",
    "write_stats_json",
    "write_histogram_csv",
    "write_section_csv",
]

DEFAULT_BIN_WIDTH = 0.1


@dataclass(frozen=True)
class M3c2Params:
    normal_mode: str = "vertical"  # "vertical" | "estimated"
    normal_scale: float = 5.0  # D: diameter of the normal-fit neighborhood
    projection_scale: float = 2.0  # d: cylinder diameter
    max_depth: float = 20.0  # cylinder half-length

    def __post_init__(self):
        if self.normal_mode not in ("vertical", "estimated"):
            raise ValueError(f"unknown normal_mode {self.normal_mode!r}")
        if not (self.normal_scale > 0 and self.projection_scale > 0 and self.max_depth > 0):
            raise ValueError("M3C2 scales must be positive")


@dataclass(frozen=True)
class DistanceStats:
    gaussian_mean: float
    rmse: float
    stddev: float
    valid: int
    invalid: int
    bin_width: float
    histogram: tuple  # ((bin_low, bin_high, count), ...)

    def as_dict(self):
        return {
            "gaussian_mean": self.gaussian_mean,
            "rmse": self.rmse,
            "stddev": self.stddev,
            "valid": self.valid,
            "invalid": self.invalid,
            "bin_width": self.bin_width,
            "histogram": [list(b) for b in self.histogram],
        }


@dataclass(frozen=True)
class ComparisonReport:
    core: PointCloud
    distances: np.ndarray  # NaN where invalid
    n_reference: np.ndarray
    n_compared: np.ndarray
    params: M3c2Params
    stats: DistanceStats
    reference_label: str = ""
    compared_label: str = ""

    @property
    def valid_mask(self):
        return (self.n_reference >= 1) & (self.n_compared >= 1)

    @property
    def valid_distances(self):
        return self.distances[self.valid_mask]


def _estimated_normals(core: PointCloud, reference: PointCloud, radius: float):
    """Per-core unit normals from a local plane fit z = ax + by + c.

    Uses reference-cloud neighbors within ``radius`` planimetrically; cores
    with fewer than 3 neighbors or a degenerate fit fall back to vertical.
    Normals are oriented upward (nz > 0), keeping the sign convention of the
    vertical mode.
    """
    index = SpatialIndex(reference)
    normals = np.zeros((len(core), 3))
    normals[:, 2] = 1.0
    rx, ry, rz = reference.x, reference.y, reference.z
    for i in range(len(core)):
        idx = index.within_radius(core.x[i], core.y[i], radius)
        if idx.shape[0] < 3:
            continue
        px = rx[idx] - core.x[i]
        py = ry[idx] - core.y[i]
        pz = rz[idx]
        A = np.column_stack([px, py, np.ones_like(px)])
        ata = A.T @ A
        if abs(np.linalg.det(ata)) < 1e-12:
            continue
        a, b, _ = np.linalg.solve(ata, A.T @ pz)
        v = np.array([-a, -b, 1.0])
        normals[i] = v / math.sqrt(a * a + b * b + 1.0)
    return normals


def m3c2_distance(
    reference: PointCloud,
    compared: PointCloud,
    params: M3c2Params | None = None,
    core: PointCloud | None = None,
) -> ComparisonReport:
    """Signed per-core-point cloud distance along local normals.

    Core points default to the reference cloud. A core point is invalid
    (NaN distance, excluded from stats) when either cloud has no point in
    its cylinder.
    """
    params = params or M3c2Params()
    if len(reference) == 0 or len(compared) == 0:
        raise ValueError("both clouds must be non-empty")
    if core is None:
        core = reference
    if len(core) == 0:
        raise ValueError("core cloud must be non-empty")

    if params.normal_mode == "vertical":
        normals = np.zeros((len(core), 3))
        normals[:, 2] = 1.0
    else:
        normals = _estimated_normals(core, reference, params.normal_scale / 2.0)
    normals = np.ascontiguousarray(normals)
    core_xyz = np.ascontiguousarray(core.xyz)
    radius = params.projection_scale / 2.0

    sums = []
    for cloud in (reference, compared):
        g = _build_grid(cloud.x.copy(), cloud.y.copy())
        mean, count = kernels.m3c2_project(
            g.xs, g.ys, np.ascontiguousarray(cloud.z), g.order, g.cell_start,
            g.nx, g.ny, g.x0, g.y0, g.cell,
            core_xyz, normals, radius, params.max_depth,
        )
        sums.append((mean, count))
    (ref_mean, n_ref), (cmp_mean, n_cmp) = sums
    distances = cmp_mean - ref_mean  # NaN propagates from empty populations

    report = ComparisonReport(
        core=core,
        distances=distances,
        n_reference=n_ref,
        n_compared=n_cmp,
        params=params,
        stats=_stats_from_arrays(distances, n_ref, n_cmp, DEFAULT_BIN_WIDTH),
        reference_label=reference.label,
        compared_label=compared.label,
    )
    return report


def _stats_from_arrays(distances, n_ref, n_cmp, bin_width) -> DistanceStats:
    valid = (n_ref >= 1) & (n_cmp >= 1)
    d = distances[valid]
    invalid = int(valid.shape[0] - d.shape[0])
    if d.shape[0] == 0:
        # All cylinders empty on one side; report NaN aggregates rather than
        # failing mid-comparison. distance_stats() raises for this case.
        return DistanceStats(
            gaussian_mean=float("nan"), rmse=float("nan"), stddev=float("nan"),
            valid=0, invalid=invalid, bin_width=float(bin_width), histogram=(),
        )
    mean = float(d.mean())
    rmse = float(math.sqrt(np.mean(d * d)))
    stddev = float(d.std())  # population
    bins = np.floor(d / bin_width).astype(np.int64)
    lo = int(bins.min())
    counts = np.bincount(bins - lo)
    histogram = tuple(
        (round((lo + i) * bin_width, 12), round((lo + i + 1) * bin_width, 12), int(c))
        for i, c in enumerate(counts)
    )
    return DistanceStats(
        gaussian_mean=mean,
        rmse=rmse,
        stddev=stddev,
        valid=int(d.shape[0]),
        invalid=invalid,
        bin_width=float(bin_width),
        histogram=histogram,
    )


def distance_stats(report: ComparisonReport, bin_width: float = DEFAULT_BIN_WIDTH) -> DistanceStats:
    """Aggregate statistics of a report's valid distances.

    gaussian_mean is the arithmetic mean of signed distances, rmse the root
    of the mean square, stddev the population standard deviation; the
    histogram uses fixed-width bins aligned to multiples of ``bin_width``.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    stats = _stats_from_arrays(
        report.distances, report.n_reference, report.n_compared, bin_width
    )
    if stats.valid == 0:
        raise NumericalError("no valid M3C2 core points (all cylinders empty)")
    return stats


def fitting_score(z_true, z_predicted) -> float:
    """Coefficient of determination R² = 1 − SSE/SST.

    1.0 is a perfect fit, 0.0 matches the mean predictor, worse is negative.
    Undefined (NumericalError) when all true values are equal.
    """
    zt = np.asarray(z_true, dtype=np.float64)
    zp = np.asarray(z_predicted, dtype=np.float64)
    if zt.shape != zp.shape or zt.ndim != 1 or zt.shape[0] < 2:
        raise ValueError("need two equal-length vectors of >= 2 values")
    sst = float(np.sum((zt - zt.mean()) ** 2))
    if sst == 0.0:
        raise NumericalError("fitting score undefined: all true values are equal")
    sse = float(np.sum((zt - zp) ** 2))
    return 1.0 - sse / sst


@dataclass(frozen=True)
class SectionProfile:
    polyline: np.ndarray  # (m, 2) vertices
    half_width: float
    station_step: float
    chainage: np.ndarray  # strictly increasing station positions
    z: np.ndarray  # (n_stations, n_clouds), NaN where absent
    labels: tuple


def extract_section(
    clouds, polyline, half_width: float, station_step: float
) -> SectionProfile:
    """Mean elevation per cloud in corridor boxes along a polyline.

    Stations sit at multiples of ``station_step`` of chainage; each collects
    points within ``half_width`` across-track of the containing segment and
    ``station_step/2`` along-track of the station. Stations with no points
    in a cloud carry NaN for it.
    """
    poly = np.asarray(polyline, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[0] < 2 or poly.shape[1] != 2:
        raise ValueError("polyline needs >= 2 (x, y) vertices")
    if not (half_width > 0 and station_step > 0):
        raise ValueError("half_width and station_step must be positive")
    seg = np.diff(poly, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    if not (seg_len > 0).all() or seg_len.sum() == 0:
        raise ValueError("degenerate polyline (zero-length segment)")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cum[-1])

    n_stations = int(math.floor(total / station_step + 1e-9)) + 1
    chain = np.arange(n_stations) * station_step

    # Station position and along-track direction from the containing segment.
    seg_of = np.clip(np.searchsorted(cum, chain, side="right") - 1, 0, len(seg) - 1)
    t = (chain - cum[seg_of]) / seg_len[seg_of]
    sx = poly[seg_of, 0] + seg[seg_of, 0] * t
    sy = poly[seg_of, 1] + seg[seg_of, 1] * t
    dirx = seg[seg_of, 0] / seg_len[seg_of]
    diry = seg[seg_of, 1] / seg_len[seg_of]

    clouds = list(clouds)
    if not clouds:
        raise ValueError("need at least one cloud")
    z = np.full((n_stations, len(clouds)), np.nan)
    reach = math.hypot(half_width, station_step / 2.0)
    for ci, cloud in enumerate(clouds):
        if len(cloud) == 0:
            continue
        index = SpatialIndex(cloud)
        cx, cy, cz = cloud.x, cloud.y, cloud.z
        for si in range(n_stations):
            cand = index.within_radius(sx[si], sy[si], reach)
            if cand.shape[0] == 0:
                continue
            px = cx[cand] - sx[si]
            py = cy[cand] - sy[si]
            along = px * dirx[si] + py * diry[si]
            across = -px * diry[si] + py * dirx[si]
            inside = (np.abs(along) <= station_step / 2.0) & (np.abs(across) <= half_width)
            if inside.any():
                z[si, ci] = float(cz[cand[inside]].mean())
    return SectionProfile(
        polyline=poly,
        half_width=float(half_width),
        station_step=float(station_step),
        chainage=chain,
        z=z,
        labels=tuple(c.label for c in clouds),
    )


# --------------------------------------------------------------------------
# plain-text writers (deterministic: no timestamps, fixed formats)


def write_distances_csv(report: ComparisonReport, path) -> None:
    lines = ["x,y,z,distance,n_reference,n_compared"]
    core = report.core.xyz
    for i in range(core.shape[0]):
        d = report.distances[i]
        dtxt = "%.6f" % d if math.isfinite(d) else ""
        lines.append(
            "%.6f,%.6f,%.6f,%s,%d,%d"
            % (core[i, 0], core[i, 1], core[i, 2], dtxt,
               report.n_reference[i], report.n_compared[i])
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_stats_json(stats: DistanceStats, path, extra: dict | None = None) -> None:
    payload = stats.as_dict()
    if extra:
        payload.update(extra)
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_histogram_csv(stats: DistanceStats, path) -> None:
    lines = ["bin_low,bin_high,count"]
    lines.extend("%.6f,%.6f,%d" % b for b in stats.histogram)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_section_csv(profile: SectionProfile, path) -> None:
    safe = [lab.replace(",", "_").replace(" ", "_") for lab in profile.labels]
    header = "chainage," + ",".join(f"z_{lab}" if lab else f"z_cloud{i}"
                                    for i, lab in enumerate(safe))
    lines = [header]
    for si in range(profile.chainage.shape[0]):
        cells = ["%.3f" % profile.chainage[si]]
        for ci in range(profile.z.shape[1]):
            v = profile.z[si, ci]
            cells.append("%.6f" % v if math.isfinite(v) else "")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
