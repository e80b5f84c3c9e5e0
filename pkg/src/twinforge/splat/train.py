"""Training loop pieces: Adam, regularized losses, and the per-step update."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import SplatTrainConfig
from ..geom.camera import Camera
from ..geom.mesh import FaceFrames
from .model import PARAM_FIELDS, SplatModel
from .render import RenderContext, RenderOutput, backward, render

DEPTH_ALPHA_MIN = 0.7  # pixels this opaque participate in the depth loss


@dataclass
class DensifyStats:
    """Accumulated per-splat statistics driving density control."""

    grad_accum: np.ndarray  # sum of screen-space positional gradient norms (NDC units)
    count: np.ndarray  # renders in which the splat was visible
    max_radius_frac: np.ndarray  # max screen radius / image width

    @classmethod
    def zeros(cls, n: int) -> "DensifyStats":
        return cls(np.zeros(n), np.zeros(n, np.int64), np.zeros(n))

    def accumulate(self, grads: dict, output: RenderOutput, width: int, height: int):
        g = grads["mean2d"]
        ndc_norm = np.hypot(g[:, 0] * width / 2, g[:, 1] * height / 2)
        vis = output.visible
        self.grad_accum[vis] += ndc_norm[vis]
        self.count[vis] += 1
        np.maximum(
            self.max_radius_frac, output.radius / width, out=self.max_radius_frac
        )

    def mean_grad(self) -> np.ndarray:
        return self.grad_accum / np.maximum(self.count, 1)


@dataclass
class LossReport:
    total: float
    l_rgb: float
    l_depth: float
    l_normal_scale: float
    psnr: float
    n_splats: int
    stepped: bool
    nonfinite_ids: np.ndarray | None = None


class Adam:
    def __init__(self, shapes: dict[str, tuple], beta1=0.9, beta2=0.999, eps=1e-15):
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lrs: dict[str, np.ndarray | float]):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1 - b1**self.t
        bias2 = 1 - b2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / bias1
            v_hat = self.v[k] / bias2
            lr = lrs[k]
            p -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def extend(self, index_map: np.ndarray, new_n: int):
        """Rebuild state after densify: rows of index_map < 0 start fresh."""
        for k in list(self.m):
            for store in (self.m, self.v):
                old = store[k]
                fresh = np.zeros((new_n,) + old.shape[1:])
                keep = index_map >= 0
                fresh[keep] = old[index_map[keep]]
                store[k] = fresh


class Trainer:
    """Owns the splat set exclusively; renders are snapshots (copies on request)."""

    def __init__(self, model: SplatModel, frames: FaceFrames, config: SplatTrainConfig,
                 scene_extent: float = 1.0):
        self.model = model
        self.frames = frames
        self.config = config
        self.scene_extent = scene_extent
        self.stats = DensifyStats.zeros(len(model))
        self.optimizer = Adam({k: v.shape for k, v in model.params().items()})
        self.step_count = 0

    def _learning_rates(self) -> dict[str, np.ndarray | float]:
        c = self.config
        lr_world = c.lr_position * self.scene_extent
        # a barycentric unit spans one face; normalize by local feature size
        face_size = 2.0 * self.frames.inradius[self.model.face_id]
        return {
            "bary": (lr_world / np.maximum(face_size, 1e-9))[:, None],
            "delta": lr_world,
            "tilt": c.lr_tilt,
            "log_scales": c.lr_scales,
            "opacity_logit": c.lr_opacity,
            "sh": c.lr_sh,
        }

    def train_step(
        self,
        views: list[tuple[Camera, np.ndarray, np.ndarray | None]],
        accumulate_stats: bool = True,
    ) -> LossReport:
        """One optimizer update from a batch of (camera, image, reference depth).

        reference depth entries may be None; the depth term is skipped there.
        """
        c = self.config
        model = self.model
        total_grads = {k: np.zeros_like(v) for k, v in model.params().items()}
        l_rgb_sum = 0.0
        l_depth_sum = 0.0
        depth_terms = 0
        for camera, image, ref_depth in views:
            out, ctx = render(
                model, self.frames, camera, mode=c.position_mode,
                background=c.background, tile=c.tile_size,
                t_min=c.transmittance_min, alpha_min=c.alpha_min,
            )
            resid = out.rgb - image
            npix = resid.size
            l_rgb = float(np.mean(resid**2))
            l_rgb_sum += l_rgb
            d_rgb = (2.0 * c.lambda_rgb / npix / len(views)) * resid

            d_depth = None
            d_alpha = None
            if ref_depth is not None and c.lambda_depth > 0:
                valid = (
                    np.isfinite(ref_depth)
                    & (out.alpha > DEPTH_ALPHA_MIN)
                    & (out.depth > 0)
                )
                nv = int(valid.sum())
                if nv > 0:
                    alpha = np.where(valid, out.alpha, 1.0)
                    exp_depth = out.depth / alpha
                    diff = np.where(valid, exp_depth - ref_depth, 0.0)
                    l_depth = float(np.abs(diff[valid]).mean())
                    l_depth_sum += l_depth
                    depth_terms += 1
                    sgn = np.sign(diff) * valid / (nv * len(views)) * c.lambda_depth
                    d_depth = sgn / alpha
                    d_alpha = -sgn * out.depth / alpha**2

            grads = backward(ctx, d_rgb, d_depth, d_alpha)
            if accumulate_stats:
                self.stats.accumulate(grads, out, camera.width, camera.height)
            for k in total_grads:
                total_grads[k] += grads[k]

        # normal-scale regularizer: lambda_n * mean(exp(l_n)^2)
        exp2 = np.exp(2.0 * model.log_scales[:, 2])
        l_nscale = float(exp2.mean())
        total_grads["log_scales"][:, 2] += (
            c.lambda_normal_scale * 2.0 * exp2 / len(model)
        )

        l_rgb_mean = l_rgb_sum / len(views)
        l_depth_mean = l_depth_sum / max(depth_terms, 1)
        total = (
            c.lambda_rgb * l_rgb_mean
            + c.lambda_depth * l_depth_mean
            + c.lambda_normal_scale * l_nscale
        )

        if not np.isfinite(total):
            bad = _nonfinite_ids(total_grads)
            return LossReport(total, l_rgb_mean, l_depth_mean, l_nscale,
                              _psnr(l_rgb_mean), len(model), False, bad)
        bad = _nonfinite_ids(total_grads)
        if bad is not None:
            return LossReport(total, l_rgb_mean, l_depth_mean, l_nscale,
                              _psnr(l_rgb_mean), len(model), False, bad)

        self.optimizer.step(model.params(), total_grads, self._learning_rates())
        self.step_count += 1
        return LossReport(total, l_rgb_mean, l_depth_mean, l_nscale,
                          _psnr(l_rgb_mean), len(model), True)

    def maybe_densify(self, rng: np.random.Generator, image_width: int) -> dict | None:
        c = self.config
        it = self.step_count
        stop = int(c.densify_stop_fraction * c.iterations)
        if it < c.densify_start or it > stop or it % c.densify_every != 0:
            return None
        from .densify import densify_and_prune

        report = densify_and_prune(self, rng)
        return report


def _psnr(mse: float) -> float:
    if mse <= 0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def _nonfinite_ids(grads: dict[str, np.ndarray]) -> np.ndarray | None:
    bad = None
    for k, g in grads.items():
        if g.size == 0:
            continue
        flat = ~np.isfinite(g.reshape(len(g), -1)).all(axis=1)
        bad = flat if bad is None else (bad | flat)
    if bad is None:
        return None
    ids = np.where(bad)[0]
    return ids if ids.size else None
