"""Vectorized numpy implementations of the hot kernels.

Reference semantics for the backend API. Every function here has a numba
twin in ``_kernels_numba`` with the same signature and the same tie-breaking
rules, so the two paths are interchangeable up to floating-point summation
order.

Grid layout (built in :mod:`bathycorr.cloud`): points are bucketed into a
uniform ``nx * ny`` cell grid over (x, y). ``order`` holds point ordinals
sorted by (cell id, ordinal); ``cell_start`` has ``nx*ny + 1`` entries so the
points of cell ``c`` are ``order[cell_start[c]:cell_start[c+1]]``. Cell ids
are row-major: ``c = iy * nx + ix``.
"""

import numpy as np

BISECTION_ITERS = 80
RAY_DET_EPS = 1e-12

_EMPTY_I64 = np.empty(0, dtype=np.int64)


def _row_slice(order, cell_start, nx, gy, gx0, gx1):
    """Point ordinals of the contiguous cell run (gx0..gx1) in row gy."""
    c0 = gy * nx + gx0
    c1 = gy * nx + gx1
    return order[cell_start[c0]:cell_start[c1 + 1]]


def _ring_candidates(order, cell_start, nx, ny, cix, ciy, ring):
    """Ordinals of all points in cells at Chebyshev distance ``ring``."""
    if ring == 0:
        return _row_slice(order, cell_start, nx, ciy, cix, cix)
    gx0 = max(cix - ring, 0)
    gx1 = min(cix + ring, nx - 1)
    parts = []
    gy = ciy - ring
    if 0 <= gy < ny:
        parts.append(_row_slice(order, cell_start, nx, gy, gx0, gx1))
    gy = ciy + ring
    if 0 <= gy < ny:
        parts.append(_row_slice(order, cell_start, nx, gy, gx0, gx1))
    for gy in range(max(ciy - ring + 1, 0), min(ciy + ring - 1, ny - 1) + 1):
        if cix - ring >= 0:
            parts.append(_row_slice(order, cell_start, nx, gy, cix - ring, cix - ring))
        if cix + ring <= nx - 1:
            parts.append(_row_slice(order, cell_start, nx, gy, cix + ring, cix + ring))
    if not parts:
        return _EMPTY_I64
    return np.concatenate(parts)


def nearest_batch(xs, ys, order, cell_start, nx, ny, x0, y0, cell_size, qx, qy):
    """Nearest point ordinal for each planimetric query.

    Ties in squared distance are broken by the lowest ordinal, matching an
    exhaustive linear scan with ``argmin``. Returns (indices, squared dists).
    """
    m = qx.shape[0]
    out_idx = np.empty(m, dtype=np.int64)
    out_d2 = np.empty(m, dtype=np.float64)
    max_ring = nx if nx > ny else ny
    for q in range(m):
        px = qx[q]
        py = qy[q]
        cix = min(max(int(np.floor((px - x0) / cell_size)), 0), nx - 1)
        ciy = min(max(int(np.floor((py - y0) / cell_size)), 0), ny - 1)
        best_d2 = np.inf
        best_i = -1
        for ring in range(max_ring + 1):
            if ring >= 1 and best_i >= 0:
                # Every unscanned cell lies outside the box of cells with
                # Chebyshev distance <= ring-1; stop once that box's interior
                # margin already exceeds the best distance.
                bx0 = x0 + (cix - ring + 1) * cell_size
                bx1 = x0 + (cix + ring) * cell_size
                by0 = y0 + (ciy - ring + 1) * cell_size
                by1 = y0 + (ciy + ring) * cell_size
                if bx0 <= px <= bx1 and by0 <= py <= by1:
                    bound = min(px - bx0, bx1 - px, py - by0, by1 - py)
                    if bound * bound > best_d2:
                        break
            cand = _ring_candidates(order, cell_start, nx, ny, cix, ciy, ring)
            if ring >= 1 and cand is _EMPTY_I64 and (
                cix - ring < 0 and cix + ring > nx - 1
                and ciy - ring < 0 and ciy + ring > ny - 1
            ):
                break
            if cand.size:
                dx = xs[cand] - px
                dy = ys[cand] - py
                d2 = dx * dx + dy * dy
                dmin = d2.min()
                if dmin < best_d2:
                    best_d2 = dmin
                    best_i = int(cand[d2 == dmin].min())
                elif dmin == best_d2 and best_i >= 0:
                    tied = int(cand[d2 == dmin].min())
                    if tied < best_i:
                        best_i = tied
        out_idx[q] = best_i
        out_d2[q] = best_d2
    return out_idx, out_d2


def _box_candidates(order, cell_start, nx, ny, x0, y0, cell_size, qx, qy, r):
    gx0 = min(max(int(np.floor((qx - r - x0) / cell_size)), 0), nx - 1)
    gx1 = min(max(int(np.floor((qx + r - x0) / cell_size)), 0), nx - 1)
    gy0 = min(max(int(np.floor((qy - r - y0) / cell_size)), 0), ny - 1)
    gy1 = min(max(int(np.floor((qy + r - y0) / cell_size)), 0), ny - 1)
    parts = [
        _row_slice(order, cell_start, nx, gy, gx0, gx1) for gy in range(gy0, gy1 + 1)
    ]
    return np.concatenate(parts) if parts else _EMPTY_I64


def radius_query(xs, ys, order, cell_start, nx, ny, x0, y0, cell_size, qx, qy, r):
    """Ordinals with planimetric distance <= r, ascending. Boundary included."""
    cand = _box_candidates(order, cell_start, nx, ny, x0, y0, cell_size, qx, qy, r)
    if not cand.size:
        return _EMPTY_I64
    dx = xs[cand] - qx
    dy = ys[cand] - qy
    hit = cand[dx * dx + dy * dy <= r * r]
    return np.sort(hit)


def m3c2_project(
    xs, ys, zs, order, cell_start, nx, ny, x0, y0, cell_size,
    core_xyz, normals, proj_radius, max_depth,
):
    """Mean axial offset of cylinder populations around each core point.

    The cylinder at core i has axis ``normals[i]`` (unit), radius
    ``proj_radius`` and half-length ``max_depth``. Returns (means, counts);
    the mean is NaN where the cylinder is empty.
    """
    m = core_xyz.shape[0]
    means = np.full(m, np.nan)
    counts = np.zeros(m, dtype=np.int64)
    pr2 = proj_radius * proj_radius
    for i in range(m):
        cx = core_xyz[i, 0]
        cy = core_xyz[i, 1]
        cz = core_xyz[i, 2]
        ax = normals[i, 0]
        ay = normals[i, 1]
        az = normals[i, 2]
        pre = max_depth * np.sqrt(ax * ax + ay * ay) + proj_radius
        cand = _box_candidates(order, cell_start, nx, ny, x0, y0, cell_size, cx, cy, pre)
        if not cand.size:
            continue
        vx = xs[cand] - cx
        vy = ys[cand] - cy
        vz = zs[cand] - cz
        s = vx * ax + vy * ay + vz * az
        rad2 = vx * vx + vy * vy + vz * vz - s * s
        inside = (np.abs(s) <= max_depth) & (rad2 <= pr2)
        k = int(np.count_nonzero(inside))
        if k:
            counts[i] = k
            means[i] = s[inside].sum() / k
    return means, counts


def select_cameras(cam_xyz, pts_xy, k):
    """Indices of the k lowest-obliquity cameras per point, ties by ordinal.

    Obliquity is ranked by the squared tangent of the straight segment from
    the camera to the point's planimetric position.
    """
    n = pts_xy.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    cx = cam_xyz[:, 0]
    cy = cam_xyz[:, 1]
    cz2 = cam_xyz[:, 2] ** 2
    chunk = 8192
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        dx = pts_xy[lo:hi, 0:1] - cx[None, :]
        dy = pts_xy[lo:hi, 1:2] - cy[None, :]
        t2 = (dx * dx + dy * dy) / cz2[None, :]
        out[lo:hi] = np.argsort(t2, axis=1, kind="stable")[:, :k]
    return out


def snell_crossings(cam_xyz, pts_xyz, n_refr):
    """Planimetric distance from each camera footprint to its refraction point.

    Element-wise over paired rows of ``cam_xyz`` / ``pts_xyz``. For row i the
    ray leaves the camera, bends at the flat z=0 surface per the refraction
    index, and hits the seabed point. Returns (s, sin_air) where ``s`` is the
    crossing offset along the camera->point planimetric segment and
    ``sin_air`` the sine of the air-side incidence angle.
    """
    dx = pts_xyz[:, 0] - cam_xyz[:, 0]
    dy = pts_xyz[:, 1] - cam_xyz[:, 1]
    R = np.sqrt(dx * dx + dy * dy)
    h = cam_xyz[:, 2]
    D = -pts_xyz[:, 2]
    lo = np.zeros_like(R)
    hi = R.copy()
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        sin_a = mid / np.sqrt(mid * mid + h * h)
        w = R - mid
        sin_w = w / np.sqrt(w * w + D * D)
        g = sin_a - n_refr * sin_w
        neg = g <= 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    s = 0.5 * (lo + hi)
    sin_air = s / np.sqrt(s * s + h * h)
    return s, sin_air


def apparent_points(cam_xyz, cam_sel, pts_xyz, n_refr):
    """Straight-ray intersection of the refracted sightlines per seabed point.

    For each point, every selected camera contributes the un-refracted ray
    through its surface crossing; the apparent position is the least-squares
    closest point to those rays (3x3 Cramer solve). Returns
    (apparent_xyz, residual_rms, mean_sin_air, ok) where ``ok`` is False for
    near-parallel ray bundles.
    """
    n, k = cam_sel.shape
    cams = cam_xyz[cam_sel.ravel()]
    pts = np.repeat(pts_xyz, k, axis=0)
    s, sin_air = snell_crossings(cams, pts, n_refr)

    dx = pts[:, 0] - cams[:, 0]
    dy = pts[:, 1] - cams[:, 1]
    R = np.sqrt(dx * dx + dy * dy)
    frac = np.where(R > 0.0, s / np.where(R > 0.0, R, 1.0), 0.0)
    fx = cams[:, 0] + dx * frac
    fy = cams[:, 1] + dy * frac

    ux = fx - cams[:, 0]
    uy = fy - cams[:, 1]
    uz = -cams[:, 2]
    norm = np.sqrt(ux * ux + uy * uy + uz * uz)
    ux /= norm
    uy /= norm
    uz /= norm
    u = np.stack([ux, uy, uz], axis=1).reshape(n, k, 3)
    origins = cams.reshape(n, k, 3)

    proj = np.eye(3)[None, None, :, :] - u[:, :, :, None] * u[:, :, None, :]
    M = proj.sum(axis=1)
    rhs = np.einsum("nkij,nkj->ni", proj, origins)

    a = M[:, 0, 0]
    b = M[:, 0, 1]
    c = M[:, 0, 2]
    d = M[:, 1, 0]
    e = M[:, 1, 1]
    f = M[:, 1, 2]
    g = M[:, 2, 0]
    h = M[:, 2, 1]
    i3 = M[:, 2, 2]
    det = a * (e * i3 - f * h) - b * (d * i3 - f * g) + c * (d * h - e * g)
    ok = np.abs(det) >= RAY_DET_EPS
    safe = np.where(ok, det, 1.0)
    r0 = rhs[:, 0]
    r1 = rhs[:, 1]
    r2 = rhs[:, 2]
    px = (r0 * (e * i3 - f * h) - b * (r1 * i3 - f * r2) + c * (r1 * h - e * r2)) / safe
    py = (a * (r1 * i3 - f * r2) - r0 * (d * i3 - f * g) + c * (d * r2 - r1 * g)) / safe
    pz = (a * (e * r2 - r1 * h) - b * (d * r2 - r1 * g) + r0 * (d * h - e * g)) / safe
    app = np.stack([px, py, pz], axis=1)
    app[~ok] = np.nan

    w = app[:, None, :] - origins
    along = np.einsum("nkj,nkj->nk", w, u)
    perp = w - along[:, :, None] * u
    d2 = np.einsum("nkj,nkj->nk", perp, perp)
    resid = np.sqrt(d2.mean(axis=1))
    resid[~ok] = np.nan
    mean_sin_air = sin_air.reshape(n, k).mean(axis=1)
    return app, resid, mean_sin_air, ok
