"""Numba kernels for BVH traversal, triangle queries, and winding numbers.

All kernels operate on flat arrays so they stay nopython-compatible; the BVH
wrapper in bvh.py owns the layout. fastmath stays off: query results are
compared against brute-force oracles at tight tolerances.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

STACK_DEPTH = 96
RAY_EPS = 1e-12
T_MIN = 1e-9


@njit(cache=True, inline="always")
def _ray_aabb(ox, oy, oz, idx, idy, idz, bmin, bmax, t_best):
    t0 = (bmin[0] - ox) * idx
    t1 = (bmax[0] - ox) * idx
    tmin = min(t0, t1)
    tmax = max(t0, t1)
    t0 = (bmin[1] - oy) * idy
    t1 = (bmax[1] - oy) * idy
    tmin = max(tmin, min(t0, t1))
    tmax = min(tmax, max(t0, t1))
    t0 = (bmin[2] - oz) * idz
    t1 = (bmax[2] - oz) * idz
    tmin = max(tmin, min(t0, t1))
    tmax = min(tmax, max(t0, t1))
    return tmax >= max(tmin, 0.0) and tmin <= t_best


@njit(cache=True, inline="always")
def _moller_trumbore(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz, cull):
    """Returns (t, u, v) with t < 0 on miss. u, v are barycentric for b and c."""
    e1x, e1y, e1z = bx - ax, by - ay, bz - az
    e2x, e2y, e2z = cx - ax, cy - ay, cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if cull:
        if det < RAY_EPS:  # det > 0 <=> front-facing (normal opposes ray)
            return -1.0, 0.0, 0.0
    elif abs(det) < RAY_EPS:
        return -1.0, 0.0, 0.0
    inv = 1.0 / det
    tx, ty, tz = ox - ax, oy - ay, oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -1e-12 or u > 1.0 + 1e-12:
        return -1.0, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -1e-12 or u + v > 1.0 + 1e-12:
        return -1.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t < T_MIN:
        return -1.0, 0.0, 0.0
    return t, u, v


@njit(cache=True)
def raycast_one(
    origin,
    direction,
    bb_min,
    bb_max,
    node_left,
    node_right,
    node_start,
    node_count,
    prim_order,
    va,
    vb,
    vc,
    cull,
):
    """Nearest hit along one ray. Returns (face_id, t, u, v); face_id < 0 on miss."""
    ox, oy, oz = origin[0], origin[1], origin[2]
    dx, dy, dz = direction[0], direction[1], direction[2]
    idx = 1.0 / dx if abs(dx) > RAY_EPS else (1e30 if dx >= 0 else -1e30)
    idy = 1.0 / dy if abs(dy) > RAY_EPS else (1e30 if dy >= 0 else -1e30)
    idz = 1.0 / dz if abs(dz) > RAY_EPS else (1e30 if dz >= 0 else -1e30)
    stack = np.empty(STACK_DEPTH, np.int32)
    sp = 0
    stack[sp] = 0
    sp += 1
    best_t = np.inf
    best_f = -1
    best_u = 0.0
    best_v = 0.0
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if not _ray_aabb(ox, oy, oz, idx, idy, idz, bb_min[ni], bb_max[ni], best_t):
            continue
        if node_count[ni] > 0:
            s = node_start[ni]
            for j in range(s, s + node_count[ni]):
                f = prim_order[j]
                t, u, v = _moller_trumbore(
                    ox, oy, oz, dx, dy, dz,
                    va[f, 0], va[f, 1], va[f, 2],
                    vb[f, 0], vb[f, 1], vb[f, 2],
                    vc[f, 0], vc[f, 1], vc[f, 2],
                    cull,
                )
                if t > 0.0 and t < best_t:
                    best_t = t
                    best_f = f
                    best_u = u
                    best_v = v
        else:
            stack[sp] = node_left[ni]
            sp += 1
            stack[sp] = node_right[ni]
            sp += 1
    return best_f, best_t, best_u, best_v


@njit(cache=True, parallel=True)
def raycast_many(
    origins, directions,
    bb_min, bb_max, node_left, node_right, node_start, node_count, prim_order,
    va, vb, vc, cull,
    out_face, out_t, out_u, out_v,
):
    n = origins.shape[0]
    for i in prange(n):
        f, t, u, v = raycast_one(
            origins[i], directions[i],
            bb_min, bb_max, node_left, node_right, node_start, node_count,
            prim_order, va, vb, vc, cull,
        )
        out_face[i] = f
        out_t[i] = t
        out_u[i] = u
        out_v[i] = v


@njit(cache=True, inline="always")
def _closest_on_triangle(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Ericson's closest-point-on-triangle. Returns (qx, qy, qz)."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        w = d1 / (d1 - d3)
        return ax + w * abx, ay + w * aby, az + w * abz
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w


@njit(cache=True, inline="always")
def _aabb_dist2(px, py, pz, bmin, bmax):
    d = 0.0
    t = max(bmin[0] - px, 0.0, px - bmax[0])
    d += t * t
    t = max(bmin[1] - py, 0.0, py - bmax[1])
    d += t * t
    t = max(bmin[2] - pz, 0.0, pz - bmax[2])
    d += t * t
    return d


@njit(cache=True)
def closest_point_one(
    point,
    bb_min, bb_max, node_left, node_right, node_start, node_count, prim_order,
    va, vb, vc,
):
    px, py, pz = point[0], point[1], point[2]
    stack = np.empty(STACK_DEPTH, np.int32)
    sp = 0
    stack[sp] = 0
    sp += 1
    best_d2 = np.inf
    best_f = -1
    bqx = bqy = bqz = 0.0
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if _aabb_dist2(px, py, pz, bb_min[ni], bb_max[ni]) >= best_d2:
            continue
        if node_count[ni] > 0:
            s = node_start[ni]
            for j in range(s, s + node_count[ni]):
                f = prim_order[j]
                qx, qy, qz = _closest_on_triangle(
                    px, py, pz,
                    va[f, 0], va[f, 1], va[f, 2],
                    vb[f, 0], vb[f, 1], vb[f, 2],
                    vc[f, 0], vc[f, 1], vc[f, 2],
                )
                d2 = (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
                if d2 < best_d2:
                    best_d2 = d2
                    best_f = f
                    bqx, bqy, bqz = qx, qy, qz
        else:
            l = node_left[ni]
            r = node_right[ni]
            dl = _aabb_dist2(px, py, pz, bb_min[l], bb_max[l])
            dr = _aabb_dist2(px, py, pz, bb_min[r], bb_max[r])
            if dl <= dr:  # push farther first so nearer is popped first
                stack[sp] = r
                sp += 1
                stack[sp] = l
                sp += 1
            else:
                stack[sp] = l
                sp += 1
                stack[sp] = r
                sp += 1
    return best_f, best_d2, bqx, bqy, bqz


@njit(cache=True, parallel=True)
def closest_point_many(
    points,
    bb_min, bb_max, node_left, node_right, node_start, node_count, prim_order,
    va, vb, vc,
    out_face, out_d2, out_q,
):
    for i in prange(points.shape[0]):
        f, d2, qx, qy, qz = closest_point_one(
            points[i],
            bb_min, bb_max, node_left, node_right, node_start, node_count,
            prim_order, va, vb, vc,
        )
        out_face[i] = f
        out_d2[i] = d2
        out_q[i, 0] = qx
        out_q[i, 1] = qy
        out_q[i, 2] = qz


@njit(cache=True, parallel=True)
def winding_numbers(points, va, vb, vc, out):
    """Generalized winding number via summed signed solid angles / 4 pi."""
    n = points.shape[0]
    m = va.shape[0]
    for i in prange(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        total = 0.0
        for f in range(m):
            axx = va[f, 0] - px
            axy = va[f, 1] - py
            axz = va[f, 2] - pz
            bxx = vb[f, 0] - px
            bxy = vb[f, 1] - py
            bxz = vb[f, 2] - pz
            cxx = vc[f, 0] - px
            cxy = vc[f, 1] - py
            cxz = vc[f, 2] - pz
            la = np.sqrt(axx * axx + axy * axy + axz * axz)
            lb = np.sqrt(bxx * bxx + bxy * bxy + bxz * bxz)
            lc = np.sqrt(cxx * cxx + cxy * cxy + cxz * cxz)
            num = (
                axx * (bxy * cxz - bxz * cxy)
                + axy * (bxz * cxx - bxx * cxz)
                + axz * (bxx * cxy - bxy * cxx)
            )
            ab = axx * bxx + axy * bxy + axz * bxz
            bc = bxx * cxx + bxy * cxy + bxz * cxz
            ca = cxx * axx + cxy * axy + cxz * axz
            den = la * lb * lc + ab * lc + bc * la + ca * lb
            total += 2.0 * np.arctan2(num, den)
        out[i] = total / (4.0 * np.pi)


@njit(cache=True, parallel=True)
def raycast_grid(
    origin, dirs,
    bb_min, bb_max, node_left, node_right, node_start, node_count, prim_order,
    va, vb, vc, cull,
    out_depth, out_face, out_u, out_v,
):
    """Per-pixel nearest hit; out_depth is the ray parameter t (unit dirs)."""
    h, w = dirs.shape[0], dirs.shape[1]
    for p in prange(h * w):
        iy = p // w
        ix = p % w
        f, t, u, v = raycast_one(
            origin, dirs[iy, ix],
            bb_min, bb_max, node_left, node_right, node_start, node_count,
            prim_order, va, vb, vc, cull,
        )
        out_face[iy, ix] = f
        out_u[iy, ix] = u
        out_v[iy, ix] = v
        out_depth[iy, ix] = t if f >= 0 else np.inf
