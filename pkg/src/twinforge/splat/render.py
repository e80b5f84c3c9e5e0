"""Differentiable splat rendering: forward image synthesis and the backward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geom.camera import Camera
from ..geom.mesh import FaceFrames
from . import _raster_kernels as rk
from .model import SplatModel, WorldGaussians, materialize, materialize_backward
from .project import ScreenGaussians, project, project_backward
from .ste import MODE_STE

DEFAULT_TILE = 16
DEFAULT_T_MIN = 1e-4
DEFAULT_ALPHA_MIN = 1.0 / 255.0


@dataclass
class RenderOutput:
    rgb: np.ndarray  # (H, W, 3)
    depth: np.ndarray  # (H, W) alpha-composited camera z
    alpha: np.ndarray  # (H, W) 1 - final transmittance
    # per-splat blend statistics
    visible: np.ndarray  # (N,) bool, survived projection and tiling
    radius: np.ndarray  # (N,) 3-sigma screen radius in pixels


@dataclass
class RenderContext:
    """Everything the backward pass needs; stale after the model mutates."""

    model: SplatModel
    frames: FaceFrames
    camera: Camera
    mode: str
    world: WorldGaussians
    screen: ScreenGaussians
    sorted_splat: np.ndarray
    tile_start: np.ndarray
    out_tfin: np.ndarray
    out_last: np.ndarray
    background: np.ndarray
    tile: int
    alpha_min: float
    n_splats: int
    param_version: int = field(default=-1)


def _tile_sort(
    screen: ScreenGaussians, width: int, height: int, tile: int
) -> tuple[np.ndarray, np.ndarray]:
    n = len(screen.mean2)
    counts = np.empty(n, np.int64)
    total = rk.count_tile_pairs(
        screen.mean2, screen.radius, screen.valid, width, height, tile, counts
    )
    offsets = np.zeros(n, np.int64)
    np.cumsum(counts[:-1], out=offsets[1:])
    tile_ids = np.empty(total, np.int64)
    splat_ids = np.empty(total, np.int64)
    rk.fill_tile_pairs(
        screen.mean2, screen.radius, screen.valid, width, height, tile,
        offsets, tile_ids, splat_ids,
    )
    # per tile, front-to-back by depth; splat index breaks exact ties
    order = np.lexsort((splat_ids, screen.depth[splat_ids], tile_ids))
    sorted_splat = splat_ids[order].astype(np.int64)
    sorted_tiles = tile_ids[order]
    tiles_x = (width + tile - 1) // tile
    tiles_y = (height + tile - 1) // tile
    tile_start = np.searchsorted(sorted_tiles, np.arange(tiles_x * tiles_y + 1)).astype(
        np.int64
    )
    return sorted_splat, tile_start


def render(
    model: SplatModel,
    frames: FaceFrames,
    camera: Camera,
    mode: str = MODE_STE,
    background: np.ndarray | tuple = (0.0, 0.0, 0.0),
    tile: int = DEFAULT_TILE,
    t_min: float = DEFAULT_T_MIN,
    alpha_min: float = DEFAULT_ALPHA_MIN,
) -> tuple[RenderOutput, RenderContext]:
    """Rasterize the splat set from `camera`; returns the image and a context
    that `backward` consumes. `rgb`/`depth` are alpha-composited; use
    output.alpha to normalize depth where needed."""
    h, w = camera.height, camera.width
    bg = np.asarray(background, np.float64)
    world = materialize(model, frames, mode)
    screen = project(world, camera, model)
    sorted_splat, tile_start = _tile_sort(screen, w, h, tile)

    out_rgb = np.zeros((h, w, 3))
    out_depth = np.zeros((h, w))
    out_alpha = np.zeros((h, w))
    out_tfin = np.ones((h, w))
    out_last = np.full((h, w), -1, np.int64)
    rk.forward(
        sorted_splat, tile_start,
        screen.mean2, screen.conic, screen.color, screen.opacity, screen.depth,
        w, h, tile, bg, t_min, alpha_min,
        out_rgb, out_depth, out_alpha, out_tfin, out_last,
    )
    visible = np.zeros(len(model), bool)
    visible[np.unique(sorted_splat)] = True
    output = RenderOutput(
        rgb=out_rgb, depth=out_depth, alpha=out_alpha,
        visible=visible, radius=3.0 * screen.sigma_max * screen.valid,
    )
    ctx = RenderContext(
        model=model, frames=frames, camera=camera, mode=mode, world=world,
        screen=screen, sorted_splat=sorted_splat, tile_start=tile_start,
        out_tfin=out_tfin, out_last=out_last, background=bg, tile=tile,
        alpha_min=alpha_min, n_splats=len(model),
    )
    return output, ctx


class StaleContextError(RuntimeError):
    pass


def backward(
    ctx: RenderContext,
    d_rgb: np.ndarray,
    d_depth: np.ndarray | None = None,
    d_alpha: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Loss-gradient images -> gradients for every anchored-splat field.

    Also returns 'mean2d' (screen-space positional gradient) for density
    control statistics.
    """
    if len(ctx.model) != ctx.n_splats:
        raise StaleContextError("render context does not match the current splat set")
    h, w = ctx.camera.height, ctx.camera.width
    if d_depth is None:
        d_depth = np.zeros((h, w))
    if d_alpha is None:
        d_alpha = np.zeros((h, w))
    pair_grads = np.zeros((len(ctx.sorted_splat), 10))
    rk.backward(
        ctx.sorted_splat, ctx.tile_start,
        ctx.screen.mean2, ctx.screen.conic, ctx.screen.color, ctx.screen.opacity,
        ctx.screen.depth,
        w, h, ctx.tile, ctx.background, ctx.alpha_min,
        ctx.out_tfin, ctx.out_last,
        np.ascontiguousarray(d_rgb, np.float64),
        np.ascontiguousarray(d_depth, np.float64),
        np.ascontiguousarray(d_alpha, np.float64),
        pair_grads,
    )
    n = ctx.n_splats
    per = np.zeros((n, 10))
    np.add.at(per, ctx.sorted_splat, pair_grads)

    d_mean2 = per[:, 0:2]
    d_conic = per[:, 2:5]
    d_color = per[:, 5:8]
    d_opacity = per[:, 8]
    d_depth_splat = per[:, 9]

    d_mean, d_cov, d_sh = project_backward(
        ctx.screen, ctx.camera, ctx.model, d_mean2, d_conic, d_color, d_depth_splat
    )
    grads = materialize_backward(ctx.model, ctx.world, d_mean, d_cov, d_opacity, ctx.mode)
    grads["sh"] = d_sh
    grads["mean2d"] = d_mean2
    return grads
