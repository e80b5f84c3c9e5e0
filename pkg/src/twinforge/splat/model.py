"""Mesh-anchored Gaussians: constrained parameterization and world materialization.

Each splat lives on one mesh face. Free parameters are pre-clip barycentric
coordinates, a pre-clip normal offset, a tilt about the face normal,
log-scales, an opacity logit, and SH color coefficients. The forward pass
projects the constrained parameters into range; gradients follow the selected
clip mode (straight-through by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geom.mesh import FaceFrames, TriangleMesh, build_face_frames
from . import sh as shlib
from .ste import MODE_STATIC, MODE_STE, clip_ste_grad, project_simplex, project_simplex_grad

PARAM_FIELDS = ("bary", "delta", "tilt", "log_scales", "opacity_logit", "sh")
SPAWN_OPACITY = 0.1
NORMAL_SCALE_SHRINK = 0.1  # exp(l_n) starts at inradius / 10


@dataclass
class SplatModel:
    face_id: np.ndarray  # (N,) int32
    bary: np.ndarray  # (N, 2) pre-clip barycentric free parameters
    delta: np.ndarray  # (N,) pre-clip normal offset, meters
    tilt: np.ndarray  # (N,) rotation about the face normal, radians
    log_scales: np.ndarray  # (N, 3) log of (s_u, s_v, s_n)
    opacity_logit: np.ndarray  # (N,)
    sh: np.ndarray  # (N, 3, B) per-channel SH coefficients
    sh_degree: int = 3
    kappa: float = 1.0  # normal offset bound = kappa * face inradius

    def __post_init__(self):
        self.face_id = np.ascontiguousarray(self.face_id, np.int32)
        for name in PARAM_FIELDS:
            setattr(self, name, np.ascontiguousarray(getattr(self, name), np.float64))

    def __len__(self) -> int:
        return len(self.face_id)

    @property
    def n_bases(self) -> int:
        return self.sh.shape[2]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def copy(self) -> "SplatModel":
        return SplatModel(
            self.face_id.copy(),
            *(getattr(self, n).copy() for n in PARAM_FIELDS),
            sh_degree=self.sh_degree,
            kappa=self.kappa,
        )

    def select(self, mask_or_idx: np.ndarray) -> "SplatModel":
        return SplatModel(
            self.face_id[mask_or_idx],
            *(getattr(self, n)[mask_or_idx] for n in PARAM_FIELDS),
            sh_degree=self.sh_degree,
            kappa=self.kappa,
        )

    @staticmethod
    def concatenate(parts: list["SplatModel"]) -> "SplatModel":
        first = parts[0]
        return SplatModel(
            np.concatenate([p.face_id for p in parts]),
            *(
                np.concatenate([getattr(p, n) for p in parts])
                for n in PARAM_FIELDS
            ),
            sh_degree=first.sh_degree,
            kappa=first.kappa,
        )

    # -- constrained views ----------------------------------------------------
    def bary_clipped(self) -> np.ndarray:
        return project_simplex(self.bary)

    def delta_clipped(self, frames: FaceFrames) -> np.ndarray:
        h = self.kappa * frames.inradius[self.face_id]
        return np.clip(self.delta, -h, h)

    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    def opacity(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.opacity_logit))

    def check_anchoring(self, frames: FaceFrames, atol: float = 1e-12) -> bool:
        """True when every splat's clipped parameters satisfy the constraints."""
        b = self.bary_clipped()
        if (b < -atol).any() or (b.sum(axis=1) > 1.0 + atol).any():
            return False
        h = self.kappa * frames.inradius[self.face_id]
        return bool((np.abs(self.delta_clipped(frames)) <= h + atol).all())


def spawn_from_mesh(
    mesh: TriangleMesh,
    frames: FaceFrames | None = None,
    sh_degree: int = 3,
    kappa: float = 1.0,
    base_color: np.ndarray | None = None,
) -> SplatModel:
    """One splat per face: centroid anchor, inradius scales, faint mid-gray."""
    if frames is None:
        frames = build_face_frames(mesh)
    n = len(frames)
    bary = np.full((n, 2), 1.0 / 3.0)
    delta = np.zeros(n)
    tilt = np.zeros(n)
    inr = np.maximum(frames.inradius, 1e-12)
    log_scales = np.stack(
        [np.log(inr), np.log(inr), np.log(inr * NORMAL_SCALE_SHRINK)], axis=1
    )
    opacity_logit = np.full(n, np.log(SPAWN_OPACITY / (1 - SPAWN_OPACITY)))
    sh = np.zeros((n, 3, shlib.n_bases(sh_degree)))
    if base_color is not None:
        sh[:, :, 0] = shlib.rgb_to_sh0(np.asarray(base_color, float)).reshape(-1, 3)
    return SplatModel(
        np.arange(n, dtype=np.int32), bary, delta, tilt, log_scales, opacity_logit, sh,
        sh_degree=sh_degree, kappa=kappa,
    )


@dataclass
class WorldGaussians:
    """Materialized world-frame gaussians plus caches for the backward pass."""

    mean: np.ndarray  # (N, 3)
    rotation: np.ndarray  # (N, 3, 3) columns are principal axes
    scales: np.ndarray  # (N, 3)
    opacity: np.ndarray  # (N,)
    # caches
    edge1: np.ndarray = field(repr=False, default=None)
    edge2: np.ndarray = field(repr=False, default=None)
    normal: np.ndarray = field(repr=False, default=None)
    bary_mult: np.ndarray = field(repr=False, default=None)
    delta_mult: np.ndarray = field(repr=False, default=None)
    rot_dphi: np.ndarray = field(repr=False, default=None)

    def covariance(self) -> np.ndarray:
        rs = self.rotation * self.scales[:, None, :]
        return rs @ np.swapaxes(rs, 1, 2)


def materialize(model: SplatModel, frames: FaceFrames, mode: str = MODE_STE) -> WorldGaussians:
    """Anchored parameters -> world means/rotations/scales/opacities."""
    fid = model.face_id
    a, b, c = (arr[fid] for arr in frames.corners)
    e1 = b - a
    e2 = c - a
    n = frames.normal[fid]

    bary = project_simplex(model.bary)
    h = model.kappa * frames.inradius[fid]
    delta = np.clip(model.delta, -h, h)
    mean = a + bary[:, :1] * e1 + bary[:, 1:] * e2 + delta[:, None] * n

    cos = np.cos(model.tilt)
    sin = np.sin(model.tilt)
    t_u = frames.t_u[fid]
    t_v = frames.t_v[fid]
    # columns of R = [t_u t_v n] @ Rz(phi)
    r_u = t_u * cos[:, None] + t_v * sin[:, None]
    r_v = -t_u * sin[:, None] + t_v * cos[:, None]
    rotation = np.stack([r_u, r_v, n], axis=2)
    # d(r_u)/dphi = -t_u sin + t_v cos = r_v ; d(r_v)/dphi = -r_u
    rot_dphi = np.stack([r_v, -r_u], axis=2)

    if mode == MODE_STATIC:
        bary_mult = np.zeros_like(model.bary)
        delta_mult = np.zeros_like(model.delta)
    else:
        bary_mult = project_simplex_grad(model.bary, mode)
        delta_mult = clip_ste_grad(model.delta, -h, h, mode)

    return WorldGaussians(
        mean=mean,
        rotation=rotation,
        scales=np.exp(model.log_scales),
        opacity=model.opacity(),
        edge1=e1,
        edge2=e2,
        normal=n,
        bary_mult=bary_mult,
        delta_mult=delta_mult,
        rot_dphi=rot_dphi,
    )


def materialize_backward(
    model: SplatModel,
    world: WorldGaussians,
    d_mean: np.ndarray,
    d_cov: np.ndarray,
    d_opacity: np.ndarray,
    mode: str = MODE_STE,
) -> dict[str, np.ndarray]:
    """Chain world-space gradients back onto the anchored parameters.

    d_cov is dL/dSigma as full symmetric (N, 3, 3); SH gradients are handled by
    the projection stage (color depends on the camera).
    """
    grads: dict[str, np.ndarray] = {}
    g_b1 = np.einsum("ni,ni->n", d_mean, world.edge1)
    g_b2 = np.einsum("ni,ni->n", d_mean, world.edge2)
    grads["bary"] = np.stack([g_b1, g_b2], axis=1) * world.bary_mult
    grads["delta"] = np.einsum("ni,ni->n", d_mean, world.normal) * world.delta_mult

    s2 = world.scales**2  # (N, 3)
    cols = world.rotation  # (N, 3, k) column k
    # dL/dl_k = 2 s_k^2 r_k^T G r_k
    g_r = np.einsum("nik,nij,njk->nk", cols, d_cov, cols)  # r_k^T G r_k per axis
    grads["log_scales"] = 2.0 * s2 * g_r
    # dL/dphi = sum_k 2 s_k^2 (dr_k/dphi)^T G r_k over k in {u, v}
    dphi_cols = world.rot_dphi  # (N, 3, 2)
    g_phi = np.einsum("nik,nij,njk->nk", dphi_cols, d_cov, cols[:, :, :2])
    grads["tilt"] = 2.0 * (s2[:, :2] * g_phi).sum(axis=1)

    if mode == MODE_STATIC:
        grads["bary"][:] = 0.0
        grads["delta"][:] = 0.0
        grads["tilt"][:] = 0.0

    alpha = world.opacity
    grads["opacity_logit"] = d_opacity * alpha * (1.0 - alpha)
    return grads
