"""Numba-compiled twins of the kernels in ``_kernels_numpy``.

Same signatures, same tie-breaking and bisection rules. Compiled serially
(no ``parallel=True``) and without ``fastmath`` so results stay deterministic
and bit-reproducible across runs; ``cache=True`` keeps recompilation out of
repeat invocations.
"""

import numpy as np
from numba import njit

BISECTION_ITERS = 80
RAY_DET_EPS = 1e-12


@njit(cache=True)
def nearest_batch(xs, ys, order, cell_start, nx, ny, x0, y0, cell_size, qx, qy):
    m = qx.shape[0]
    out_idx = np.empty(m, dtype=np.int64)
    out_d2 = np.empty(m, dtype=np.float64)
    max_ring = nx if nx > ny else ny
    for q in range(m):
        px = qx[q]
        py = qy[q]
        cix = int(np.floor((px - x0) / cell_size))
        if cix < 0:
            cix = 0
        elif cix > nx - 1:
            cix = nx - 1
        ciy = int(np.floor((py - y0) / cell_size))
        if ciy < 0:
            ciy = 0
        elif ciy > ny - 1:
            ciy = ny - 1
        best_d2 = np.inf
        best_i = -1
        for ring in range(max_ring + 1):
            if ring >= 1 and best_i >= 0:
                bx0 = x0 + (cix - ring + 1) * cell_size
                bx1 = x0 + (cix + ring) * cell_size
                by0 = y0 + (ciy - ring + 1) * cell_size
                by1 = y0 + (ciy + ring) * cell_size
                if bx0 <= px <= bx1 and by0 <= py <= by1:
                    bound = px - bx0
                    if bx1 - px < bound:
                        bound = bx1 - px
                    if py - by0 < bound:
                        bound = py - by0
                    if by1 - py < bound:
                        bound = by1 - py
                    if bound * bound > best_d2:
                        break
            gx0 = cix - ring
            gx1 = cix + ring
            gy0 = ciy - ring
            gy1 = ciy + ring
            if ring >= 1 and gx0 < 0 and gx1 > nx - 1 and gy0 < 0 and gy1 > ny - 1:
                break
            cgx0 = max(gx0, 0)
            cgx1 = min(gx1, nx - 1)
            for gy in range(max(gy0, 0), min(gy1, ny - 1) + 1):
                on_rim = gy == gy0 or gy == gy1
                for gx in range(cgx0, cgx1 + 1):
                    if not on_rim and gx != gx0 and gx != gx1:
                        continue
                    c = gy * nx + gx
                    for t in range(cell_start[c], cell_start[c + 1]):
                        i = order[t]
                        dx = xs[i] - px
                        dy = ys[i] - py
                        d2 = dx * dx + dy * dy
                        if d2 < best_d2 or (d2 == best_d2 and i < best_i):
                            best_d2 = d2
                            best_i = i
        out_idx[q] = best_i
        out_d2[q] = best_d2
    return out_idx, out_d2


@njit(cache=True)
def radius_query(xs, ys, order, cell_start, nx, ny, x0, y0, cell_size, qx, qy, r):
    gx0 = int(np.floor((qx - r - x0) / cell_size))
    gx1 = int(np.floor((qx + r - x0) / cell_size))
    gy0 = int(np.floor((qy - r - y0) / cell_size))
    gy1 = int(np.floor((qy + r - y0) / cell_size))
    if gx0 < 0:
        gx0 = 0
    if gx1 > nx - 1:
        gx1 = nx - 1
    if gy0 < 0:
        gy0 = 0
    if gy1 > ny - 1:
        gy1 = ny - 1
    r2 = r * r
    count = 0
    for gy in range(gy0, gy1 + 1):
        for gx in range(gx0, gx1 + 1):
            c = gy * nx + gx
            for t in range(cell_start[c], cell_start[c + 1]):
                i = order[t]
                dx = xs[i] - qx
                dy = ys[i] - qy
                if dx * dx + dy * dy <= r2:
                    count += 1
    out = np.empty(count, dtype=np.int64)
    pos = 0
    for gy in range(gy0, gy1 + 1):
        for gx in range(gx0, gx1 + 1):
            c = gy * nx + gx
            for t in range(cell_start[c], cell_start[c + 1]):
                i = order[t]
                dx = xs[i] - qx
                dy = ys[i] - qy
                if dx * dx + dy * dy <= r2:
                    out[pos] = i
                    pos += 1
    return np.sort(out)


@njit(cache=True)
def m3c2_project(
    xs, ys, zs, order, cell_start, nx, ny, x0, y0, cell_size,
    core_xyz, normals, proj_radius, max_depth,
):
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
        gx0 = int(np.floor((cx - pre - x0) / cell_size))
        gx1 = int(np.floor((cx + pre - x0) / cell_size))
        gy0 = int(np.floor((cy - pre - y0) / cell_size))
        gy1 = int(np.floor((cy + pre - y0) / cell_size))
        if gx0 < 0:
            gx0 = 0
        if gx1 > nx - 1:
            gx1 = nx - 1
        if gy0 < 0:
            gy0 = 0
        if gy1 > ny - 1:
            gy1 = ny - 1
        acc = 0.0
        k = 0
        for gy in range(gy0, gy1 + 1):
            for gx in range(gx0, gx1 + 1):
                c = gy * nx + gx
                for t in range(cell_start[c], cell_start[c + 1]):
                    j = order[t]
                    vx = xs[j] - cx
                    vy = ys[j] - cy
                    vz = zs[j] - cz
                    s = vx * ax + vy * ay + vz * az
                    if s > max_depth or s < -max_depth:
                        continue
                    rad2 = vx * vx + vy * vy + vz * vz - s * s
                    if rad2 <= pr2:
                        acc += s
                        k += 1
        if k:
            counts[i] = k
            means[i] = acc / k
    return means, counts


@njit(cache=True)
def select_cameras(cam_xyz, pts_xy, k):
    n = pts_xy.shape[0]
    mcam = cam_xyz.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    keys = np.empty(k, dtype=np.float64)
    for i in range(n):
        px = pts_xy[i, 0]
        py = pts_xy[i, 1]
        filled = 0
        for j in range(mcam):
            dx = px - cam_xyz[j, 0]
            dy = py - cam_xyz[j, 1]
            t2 = (dx * dx + dy * dy) / (cam_xyz[j, 2] * cam_xyz[j, 2])
            if filled < k:
                pos = filled
                while pos > 0 and keys[pos - 1] > t2:
                    keys[pos] = keys[pos - 1]
                    out[i, pos] = out[i, pos - 1]
                    pos -= 1
                keys[pos] = t2
                out[i, pos] = j
                filled += 1
            elif t2 < keys[k - 1]:
                pos = k - 1
                while pos > 0 and keys[pos - 1] > t2:
                    keys[pos] = keys[pos - 1]
                    out[i, pos] = out[i, pos - 1]
                    pos -= 1
                keys[pos] = t2
                out[i, pos] = j
    return out


@njit(cache=True)
def _crossing(dx, dy, h, D, n_refr):
    R = np.sqrt(dx * dx + dy * dy)
    lo = 0.0
    hi = R
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        sin_a = mid / np.sqrt(mid * mid + h * h)
        w = R - mid
        sin_w = w / np.sqrt(w * w + D * D)
        if sin_a - n_refr * sin_w <= 0.0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return s, s / np.sqrt(s * s + h * h), R


@njit(cache=True)
def snell_crossings(cam_xyz, pts_xyz, n_refr):
    m = cam_xyz.shape[0]
    s_out = np.empty(m, dtype=np.float64)
    sin_out = np.empty(m, dtype=np.float64)
    for i in range(m):
        s, sin_air, _ = _crossing(
            pts_xyz[i, 0] - cam_xyz[i, 0],
            pts_xyz[i, 1] - cam_xyz[i, 1],
            cam_xyz[i, 2],
            -pts_xyz[i, 2],
            n_refr,
        )
        s_out[i] = s
        sin_out[i] = sin_air
    return s_out, sin_out


@njit(cache=True)
def apparent_points(cam_xyz, cam_sel, pts_xyz, n_refr):
    n, k = cam_sel.shape
    app = np.full((n, 3), np.nan)
    resid = np.full(n, np.nan)
    mean_sin = np.empty(n, dtype=np.float64)
    ok = np.zeros(n, dtype=np.bool_)
    ux = np.empty(k, dtype=np.float64)
    uy = np.empty(k, dtype=np.float64)
    uz = np.empty(k, dtype=np.float64)
    for i in range(n):
        m00 = 0.0
        m01 = 0.0
        m02 = 0.0
        m11 = 0.0
        m12 = 0.0
        m22 = 0.0
        r0 = 0.0
        r1 = 0.0
        r2 = 0.0
        sin_acc = 0.0
        for j in range(k):
            cam = cam_sel[i, j]
            cx = cam_xyz[cam, 0]
            cy = cam_xyz[cam, 1]
            cz = cam_xyz[cam, 2]
            dx = pts_xyz[i, 0] - cx
            dy = pts_xyz[i, 1] - cy
            s, sin_air, R = _crossing(dx, dy, cz, -pts_xyz[i, 2], n_refr)
            sin_acc += sin_air
            frac = s / R if R > 0.0 else 0.0
            vx = dx * frac
            vy = dy * frac
            vz = -cz
            norm = np.sqrt(vx * vx + vy * vy + vz * vz)
            vx /= norm
            vy /= norm
            vz /= norm
            ux[j] = vx
            uy[j] = vy
            uz[j] = vz
            # accumulate (I - u u^T) and (I - u u^T) @ camera
            m00 += 1.0 - vx * vx
            m01 += -vx * vy
            m02 += -vx * vz
            m11 += 1.0 - vy * vy
            m12 += -vy * vz
            m22 += 1.0 - vz * vz
            dotc = vx * cx + vy * cy + vz * cz
            r0 += cx - vx * dotc
            r1 += cy - vy * dotc
            r2 += cz - vz * dotc
        mean_sin[i] = sin_acc / k
        det = (
            m00 * (m11 * m22 - m12 * m12)
            - m01 * (m01 * m22 - m12 * m02)
            + m02 * (m01 * m12 - m11 * m02)
        )
        if np.abs(det) < RAY_DET_EPS:
            continue
        px = (
            r0 * (m11 * m22 - m12 * m12)
            - m01 * (r1 * m22 - m12 * r2)
            + m02 * (r1 * m12 - m11 * r2)
        ) / det
        py = (
            m00 * (r1 * m22 - m12 * r2)
            - r0 * (m01 * m22 - m12 * m02)
            + m02 * (m01 * r2 - r1 * m02)
        ) / det
        pz = (
            m00 * (m11 * r2 - r1 * m12)
            - m01 * (m01 * r2 - r1 * m02)
            + r0 * (m01 * m12 - m11 * m02)
        ) / det
        app[i, 0] = px
        app[i, 1] = py
        app[i, 2] = pz
        acc = 0.0
        for j in range(k):
            cam = cam_sel[i, j]
            wx = px - cam_xyz[cam, 0]
            wy = py - cam_xyz[cam, 1]
            wz = pz - cam_xyz[cam, 2]
            along = wx * ux[j] + wy * uy[j] + wz * uz[j]
            ex = wx - along * ux[j]
            ey = wy - along * uy[j]
            ez = wz - along * uz[j]
            acc += ex * ex + ey * ey + ez * ez
        resid[i] = np.sqrt(acc / k)
        ok[i] = True
    return app, resid, mean_sin, ok
