"""Tile-based alpha-compositing rasterizer kernels (parallel over tiles).

Forward walks each tile's depth-sorted splats front to back per pixel until
the transmittance cutoff. Backward replays the walk back to front with suffix
accumulators, writing gradients into per-(tile, splat) slots so tiles never
race; the wrapper reduces slots to per-splat gradients in fixed order.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

ALPHA_MAX = 0.99


@njit(cache=True)
def count_tile_pairs(mean2, radius, valid, width, height, tile, counts):
    n = mean2.shape[0]
    tiles_x = (width + tile - 1) // tile
    tiles_y = (height + tile - 1) // tile
    total = 0
    for i in range(n):
        if not valid[i]:
            counts[i] = 0
            continue
        r = radius[i]
        x0 = int(max(0.0, np.floor((mean2[i, 0] - r) / tile)))
        x1 = int(min(tiles_x - 1.0, np.floor((mean2[i, 0] + r) / tile)))
        y0 = int(max(0.0, np.floor((mean2[i, 1] - r) / tile)))
        y1 = int(min(tiles_y - 1.0, np.floor((mean2[i, 1] + r) / tile)))
        if x1 < x0 or y1 < y0:
            counts[i] = 0
            continue
        counts[i] = (x1 - x0 + 1) * (y1 - y0 + 1)
        total += counts[i]
    return total


@njit(cache=True)
def fill_tile_pairs(mean2, radius, valid, width, height, tile, offsets, tile_ids, splat_ids):
    n = mean2.shape[0]
    tiles_x = (width + tile - 1) // tile
    tiles_y = (height + tile - 1) // tile
    for i in range(n):
        if not valid[i]:
            continue
        r = radius[i]
        x0 = int(max(0.0, np.floor((mean2[i, 0] - r) / tile)))
        x1 = int(min(tiles_x - 1.0, np.floor((mean2[i, 0] + r) / tile)))
        y0 = int(max(0.0, np.floor((mean2[i, 1] - r) / tile)))
        y1 = int(min(tiles_y - 1.0, np.floor((mean2[i, 1] + r) / tile)))
        if x1 < x0 or y1 < y0:
            continue
        k = offsets[i]
        for ty in range(y0, y1 + 1):
            for tx in range(x0, x1 + 1):
                tile_ids[k] = ty * tiles_x + tx
                splat_ids[k] = i
                k += 1


@njit(cache=True, parallel=True)
def forward(
    sorted_splat, tile_start,
    mean2, conic, color, opacity, depth,
    width, height, tile, bg, t_min, alpha_min,
    out_rgb, out_depth, out_alpha, out_tfin, out_last,
):
    tiles_x = (width + tile - 1) // tile
    n_tiles = tile_start.shape[0] - 1
    for t in prange(n_tiles):
        ty = t // tiles_x
        tx = t % tiles_x
        px0 = tx * tile
        py0 = ty * tile
        s0 = tile_start[t]
        s1 = tile_start[t + 1]
        for py in range(py0, min(py0 + tile, height)):
            for px in range(px0, min(px0 + tile, width)):
                cx = px + 0.5
                cy = py + 0.5
                T = 1.0
                r = 0.0
                g = 0.0
                b = 0.0
                d = 0.0
                last = -1
                for s in range(s0, s1):
                    i = sorted_splat[s]
                    dx = cx - mean2[i, 0]
                    dy = cy - mean2[i, 1]
                    q = conic[i, 0] * dx * dx + 2.0 * conic[i, 1] * dx * dy + conic[i, 2] * dy * dy
                    if q < 0.0:
                        continue
                    gauss = np.exp(-0.5 * q)
                    a = opacity[i] * gauss
                    if a < alpha_min:
                        continue
                    if a > ALPHA_MAX:
                        a = ALPHA_MAX
                    w = a * T
                    r += w * color[i, 0]
                    g += w * color[i, 1]
                    b += w * color[i, 2]
                    d += w * depth[i]
                    T *= 1.0 - a
                    last = s
                    if T < t_min:
                        break
                out_rgb[py, px, 0] = r + T * bg[0]
                out_rgb[py, px, 1] = g + T * bg[1]
                out_rgb[py, px, 2] = b + T * bg[2]
                out_depth[py, px] = d
                out_alpha[py, px] = 1.0 - T
                out_tfin[py, px] = T
                out_last[py, px] = last


@njit(cache=True, parallel=True)
def backward(
    sorted_splat, tile_start,
    mean2, conic, color, opacity, depth,
    width, height, tile, bg, alpha_min,
    out_tfin, out_last,
    d_rgb, d_depth, d_alpha,
    pair_grads,
):
    """pair_grads (P, 10), packed per (tile, splat) slot:
    [0:2] mean2, [2:5] conic, [5:8] color, [8] opacity, [9] depth."""
    tiles_x = (width + tile - 1) // tile
    n_tiles = tile_start.shape[0] - 1
    for t in prange(n_tiles):
        ty = t // tiles_x
        tx = t % tiles_x
        px0 = tx * tile
        py0 = ty * tile
        s0 = tile_start[t]
        for py in range(py0, min(py0 + tile, height)):
            for px in range(px0, min(px0 + tile, width)):
                last = out_last[py, px]
                if last < 0:
                    continue
                cx = px + 0.5
                cy = py + 0.5
                dl_r = d_rgb[py, px, 0]
                dl_g = d_rgb[py, px, 1]
                dl_b = d_rgb[py, px, 2]
                dl_d = d_depth[py, px]
                dl_a = d_alpha[py, px]
                T_behind = out_tfin[py, px]
                t_fin = out_tfin[py, px]
                # suffix sums of color/depth contributions behind the current splat
                sr = 0.0
                sg = 0.0
                sb = 0.0
                sd = 0.0
                for s in range(last, s0 - 1, -1):
                    i = sorted_splat[s]
                    dx = cx - mean2[i, 0]
                    dy = cy - mean2[i, 1]
                    q = conic[i, 0] * dx * dx + 2.0 * conic[i, 1] * dx * dy + conic[i, 2] * dy * dy
                    if q < 0.0:
                        continue
                    gauss = np.exp(-0.5 * q)
                    a = opacity[i] * gauss
                    if a < alpha_min:
                        continue
                    clamped = a > ALPHA_MAX
                    if clamped:
                        a = ALPHA_MAX
                    T_i = T_behind / (1.0 - a)  # transmittance in front of splat i
                    w = a * T_i
                    # color / depth gradients
                    pair_grads[s, 5] += w * dl_r
                    pair_grads[s, 6] += w * dl_g
                    pair_grads[s, 7] += w * dl_b
                    pair_grads[s, 9] += w * dl_d
                    # alpha gradient: front term minus reweighted suffix (incl. bg)
                    d_a = (
                        dl_r * (color[i, 0] * T_i - (sr + bg[0] * t_fin) / (1.0 - a))
                        + dl_g * (color[i, 1] * T_i - (sg + bg[1] * t_fin) / (1.0 - a))
                        + dl_b * (color[i, 2] * T_i - (sb + bg[2] * t_fin) / (1.0 - a))
                        + dl_d * (depth[i] * T_i - sd / (1.0 - a))
                        + dl_a * (t_fin / (1.0 - a))
                    )
                    if not clamped:
                        pair_grads[s, 8] += d_a * gauss  # d opacity
                        d_g = d_a * opacity[i]
                        d_q = -0.5 * gauss * d_g
                        pair_grads[s, 2] += d_q * dx * dx
                        pair_grads[s, 3] += d_q * 2.0 * dx * dy
                        pair_grads[s, 4] += d_q * dy * dy
                        d_dx = d_q * (2.0 * conic[i, 0] * dx + 2.0 * conic[i, 1] * dy)
                        d_dy = d_q * (2.0 * conic[i, 1] * dx + 2.0 * conic[i, 2] * dy)
                        pair_grads[s, 0] += -d_dx
                        pair_grads[s, 1] += -d_dy
                    # roll suffix state to include splat i
                    sr += w * color[i, 0]
                    sg += w * color[i, 1]
                    sb += w * color[i, 2]
                    sd += w * depth[i]
                    T_behind = T_i
