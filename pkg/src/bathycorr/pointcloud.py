"""Point-cloud data model, XYZ text I/O, and planimetric spatial indexing.

Conventions used throughout the package:

* coordinates are meters in an arbitrary projected system,
* elevation ``z`` is negative below the water surface and the surface datum
  sits at ``z = 0``.

The spatial index is a uniform 2D cell grid over (x, y). Queries are exact:
``nearest`` returns the same ordinal an exhaustive linear scan would (ties
broken by the lowest ordinal) and ``within_radius`` includes the boundary.
The heavy query loops live in the backend kernel modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import kernels
from .errors import InputError

__all__ = ["PointCloud", "SpatialIndex", "read_cloud", "write_cloud", "build_index"]


@dataclass(frozen=True)
class PointCloud:
    """Immutable ordered set of 3D points plus a free-text label."""

    xyz: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.xyz, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"point array must have shape (n, 3), got {arr.shape}")
        if arr.size and not np.isfinite(arr).all():
            raise ValueError("point coordinates must be finite")
        if arr.flags.writeable or not arr.flags.c_contiguous:
            arr = arr.copy()  # own the storage; never freeze a caller's array
            arr.setflags(write=False)
        object.__setattr__(self, "xyz", arr)

    def __len__(self):
        return self.xyz.shape[0]

    @property
    def x(self):
        return self.xyz[:, 0]

    @property
    def y(self):
        return self.xyz[:, 1]

    @property
    def z(self):
        return self.xyz[:, 2]

    def with_z(self, z: np.ndarray, label: str | None = None) -> "PointCloud":
        """Copy of the cloud with replaced elevations (same planimetry)."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (len(self),):
            raise ValueError("replacement z must have one value per point")
        out = np.column_stack([self.xyz[:, 0], self.xyz[:, 1], z])
        return PointCloud(out, self.label if label is None else label)


def read_cloud(path, format: str = "xyz-csv", label: str | None = None) -> PointCloud:
    """Parse a delimited x,y,z text file into a PointCloud.

    Fields may be separated by commas and/or whitespace. One optional
    non-numeric header line is skipped, ``#``-prefixed lines are comments,
    blank lines are ignored. Rows need at least three numeric fields (extra
    fields are ignored); any malformed or non-finite row raises
    :class:`InputError` carrying its 1-based line number.
    """
    if format != "xyz-csv":
        raise ValueError(f"unsupported cloud format: {format!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read point cloud {path}: {exc}") from exc

    rows: list[tuple[float, float, float]] = []
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        try:
            if len(fields) < 3:
                raise ValueError("fewer than 3 fields")
            x, y, z = float(fields[0]), float(fields[1]), float(fields[2])
        except ValueError:
            if not seen_data:
                # Optional single header line (e.g. "x,y,z").
                seen_data = True
                continue
            raise InputError(f"{path}:{lineno}: malformed point row: {raw!r}") from None
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise InputError(f"{path}:{lineno}: non-finite coordinate in row: {raw!r}")
        seen_data = True
        rows.append((x, y, z))

    arr = np.array(rows, dtype=np.float64) if rows else np.empty((0, 3))
    return PointCloud(arr, label=path.stem if label is None else label)


def write_cloud(cloud: PointCloud, path) -> None:
    """Write ``x,y,z`` rows (6 decimal places, meters) under a header line.

    Round-trips through :func:`read_cloud` to within 1e-6 m per coordinate.
    An empty cloud produces a header-only file.
    """
    path = Path(path)
    lines = ["x,y,z"]
    lines.extend(
        "%.6f,%.6f,%.6f" % (p[0], p[1], p[2]) for p in cloud.xyz
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class _Grid:
    xs: np.ndarray
    ys: np.ndarray
    order: np.ndarray
    cell_start: np.ndarray
    nx: int
    ny: int
    x0: float
    y0: float
    cell: float


def _build_grid(xs: np.ndarray, ys: np.ndarray) -> _Grid:
    n = xs.shape[0]
    x0 = float(xs.min())
    y0 = float(ys.min())
    span_x = float(xs.max()) - x0
    span_y = float(ys.max()) - y0
    area = span_x * span_y
    if area > 0.0:
        cell = math.sqrt(area / n)  # ~1 point per cell on average
    elif max(span_x, span_y) > 0.0:
        cell = max(span_x, span_y) / math.ceil(math.sqrt(n))
    else:
        cell = 1.0
    cap = 4 * math.ceil(math.sqrt(n)) + 1  # bound the cell count per axis
    cell = max(cell, span_x / cap, span_y / cap)
    if cell <= 0.0 or not math.isfinite(cell):
        cell = 1.0
    nx = int(span_x / cell) + 1
    ny = int(span_y / cell) + 1

    ix = np.clip(((xs - x0) / cell).astype(np.int64), 0, nx - 1)
    iy = np.clip(((ys - y0) / cell).astype(np.int64), 0, ny - 1)
    cell_id = iy * nx + ix
    order = np.argsort(cell_id, kind="stable").astype(np.int64)
    counts = np.bincount(cell_id, minlength=nx * ny)
    cell_start = np.zeros(nx * ny + 1, dtype=np.int64)
    np.cumsum(counts, out=cell_start[1:])
    return _Grid(
        np.ascontiguousarray(xs), np.ascontiguousarray(ys),
        order, cell_start, nx, ny, x0, y0, cell,
    )


class SpatialIndex:
    """Uniform-grid planimetric index over a PointCloud.

    Results are deterministic and match an exhaustive linear scan exactly:
    nearest-neighbor ties go to the lowest point ordinal, and radius queries
    return ascending ordinals with the boundary (d == r) included.
    """

    def __init__(self, cloud: PointCloud):
        if len(cloud) == 0:
            raise ValueError("cannot index an empty point cloud")
        self.cloud = cloud
        self._g = _build_grid(cloud.xyz[:, 0].copy(), cloud.xyz[:, 1].copy())

    def _query_args(self):
        g = self._g
        return (g.xs, g.ys, g.order, g.cell_start, g.nx, g.ny, g.x0, g.y0, g.cell)

    def nearest(self, x: float, y: float) -> int:
        """Ordinal of the planimetrically nearest point."""
        idx, _ = kernels.nearest_batch(
            *self._query_args(),
            np.array([x], dtype=np.float64), np.array([y], dtype=np.float64),
        )
        return int(idx[0])

    def nearest_many(self, qx: np.ndarray, qy: np.ndarray):
        """Vectorized nearest query; returns (ordinals, squared distances)."""
        qx = np.ascontiguousarray(qx, dtype=np.float64)
        qy = np.ascontiguousarray(qy, dtype=np.float64)
        return kernels.nearest_batch(*self._query_args(), qx, qy)

    def within_radius(self, x: float, y: float, r: float) -> np.ndarray:
        """Ascending ordinals of points with planimetric distance <= r."""
        if r < 0:
            raise ValueError("radius must be non-negative")
        return kernels.radius_query(*self._query_args(), float(x), float(y), float(r))


def build_index(cloud: PointCloud) -> SpatialIndex:
    """Build the planimetric index; raises ValueError on an empty cloud."""
    return SpatialIndex(cloud)
