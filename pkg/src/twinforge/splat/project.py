"""EWA projection of world gaussians to screen space, forward and backward."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geom.camera import Camera
from . import sh as shlib
from .model import SplatModel, WorldGaussians

NEAR_CLIP = 0.05
SCREEN_BLUR = 0.3  # classic low-pass added to the 2D covariance diagonal
# 3.5 sigma: the tile box always covers every pixel whose alpha can clear the
# 1/255 cutoff (0.99 * exp(-3.5^2 / 2) < 1/255), so binning never clips support
RADIUS_SIGMA = 3.5


@dataclass
class ScreenGaussians:
    mean2: np.ndarray  # (N, 2) pixels
    conic: np.ndarray  # (N, 3) inverse 2D covariance (a, b, c)
    color: np.ndarray  # (N, 3)
    opacity: np.ndarray  # (N,)
    depth: np.ndarray  # (N,) camera-space z
    radius: np.ndarray  # (N,) tile-binning radius, pixels
    sigma_max: np.ndarray  # (N,) largest screen-space standard deviation
    valid: np.ndarray  # (N,) bool
    # caches for backward
    p_cam: np.ndarray = field(repr=False, default=None)
    cov_cam: np.ndarray = field(repr=False, default=None)
    jac: np.ndarray = field(repr=False, default=None)
    cov2: np.ndarray = field(repr=False, default=None)
    view_dir: np.ndarray = field(repr=False, default=None)
    view_dist: np.ndarray = field(repr=False, default=None)
    basis: np.ndarray = field(repr=False, default=None)
    color_gate: np.ndarray = field(repr=False, default=None)


def project(world: WorldGaussians, camera: Camera, model: SplatModel) -> ScreenGaussians:
    n = len(world.mean)
    R = camera.rotation  # world_from_camera
    t = camera.center
    p_cam = (world.mean - t) @ R  # = R^T (mu - t)
    z = p_cam[:, 2]
    valid = z > NEAR_CLIP

    zs = np.where(valid, z, 1.0)
    u = camera.fx * p_cam[:, 0] / zs + camera.cx
    v = camera.fy * p_cam[:, 1] / zs + camera.cy
    mean2 = np.stack([u, v], axis=1)

    cov = world.covariance()
    cov_cam = np.einsum("ji,njk,kl->nil", R, cov, R)  # R^T cov R

    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = camera.fx / zs
    jac[:, 0, 2] = -camera.fx * p_cam[:, 0] / zs**2
    jac[:, 1, 1] = camera.fy / zs
    jac[:, 1, 2] = -camera.fy * p_cam[:, 1] / zs**2

    cov2 = np.einsum("nij,njk,nlk->nil", jac, cov_cam, jac)
    cov2[:, 0, 0] += SCREEN_BLUR
    cov2[:, 1, 1] += SCREEN_BLUR

    a = cov2[:, 0, 0]
    b = cov2[:, 0, 1]
    c = cov2[:, 1, 1]
    det = a * c - b * b
    valid &= det > 1e-12
    det_s = np.where(det > 1e-12, det, 1.0)
    conic = np.stack([c / det_s, -b / det_s, a / det_s], axis=1)

    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum((0.5 * (a - c)) ** 2 + b * b, 0.0))
    sigma_max = np.sqrt(np.maximum(lam_max, 0.0))
    radius = np.ceil(RADIUS_SIGMA * sigma_max)

    # view-dependent color from SH in the world frame
    rel = world.mean - t
    dist = np.linalg.norm(rel, axis=1)
    dist = np.maximum(dist, 1e-12)
    view_dir = rel / dist[:, None]
    basis = shlib.eval_basis(view_dir, model.sh_degree)
    raw = np.einsum("ncb,nb->nc", model.sh, basis) + 0.5
    color_gate = (raw > 0.0).astype(np.float64)
    color = np.maximum(raw, 0.0)

    # drop splats fully outside the image
    inside = (
        (mean2[:, 0] + radius >= 0)
        & (mean2[:, 0] - radius < camera.width)
        & (mean2[:, 1] + radius >= 0)
        & (mean2[:, 1] - radius < camera.height)
    )
    valid &= inside

    return ScreenGaussians(
        mean2=mean2,
        conic=conic,
        color=color,
        opacity=world.opacity,
        depth=z,
        radius=radius,
        sigma_max=sigma_max,
        valid=valid,
        p_cam=p_cam,
        cov_cam=cov_cam,
        jac=jac,
        cov2=cov2,
        view_dir=view_dir,
        view_dist=dist,
        basis=basis,
        color_gate=color_gate,
    )


def project_backward(
    screen: ScreenGaussians,
    camera: Camera,
    model: SplatModel,
    d_mean2: np.ndarray,
    d_conic: np.ndarray,
    d_color: np.ndarray,
    d_depth: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Screen-space gradients -> (d_mean_world, d_cov_world, d_sh).

    Invalid splats contribute zero. d_conic is packed (a, b, c) matching the
    rasterizer's quadratic form q = a dx^2 + 2 b dx dy + c dy^2.
    """
    n = len(screen.mean2)
    live = screen.valid
    d_mean2 = d_mean2 * live[:, None]
    d_conic = d_conic * live[:, None]
    d_color = d_color * live[:, None]
    d_depth = d_depth * live

    R = camera.rotation
    fx, fy = camera.fx, camera.fy
    x, y, z = screen.p_cam[:, 0], screen.p_cam[:, 1], screen.p_cam[:, 2]
    z = np.where(live, z, 1.0)

    # conic = inv(cov2): dL/dM = -C G C with G the symmetrized conic gradient
    C = np.empty((n, 2, 2))
    C[:, 0, 0] = screen.conic[:, 0]
    C[:, 0, 1] = C[:, 1, 0] = screen.conic[:, 1]
    C[:, 1, 1] = screen.conic[:, 2]
    G = np.empty((n, 2, 2))
    G[:, 0, 0] = d_conic[:, 0]
    G[:, 0, 1] = G[:, 1, 0] = 0.5 * d_conic[:, 1]
    G[:, 1, 1] = d_conic[:, 2]
    d_cov2 = -np.einsum("nij,njk,nkl->nil", C, G, C)

    # cov2 = J cov_cam J^T (+ blur): gradients for cov_cam and J
    J = screen.jac
    d_cov_cam = np.einsum("nji,njk,nkl->nil", J, d_cov2, J)  # J^T dM J
    d_J = 2.0 * np.einsum("nij,njk,nkl->nil", d_cov2, J, screen.cov_cam)

    # cov_cam = R^T cov R
    d_cov = np.einsum("ij,njk,lk->nil", R, d_cov_cam, R)  # R dCc R^T

    # pixel means
    d_x = d_mean2[:, 0] * fx / z
    d_y = d_mean2[:, 1] * fy / z
    d_z = -d_mean2[:, 0] * fx * x / z**2 - d_mean2[:, 1] * fy * y / z**2
    # J's dependence on p_cam
    d_x += d_J[:, 0, 2] * (-fx / z**2)
    d_y += d_J[:, 1, 2] * (-fy / z**2)
    d_z += (
        d_J[:, 0, 0] * (-fx / z**2)
        + d_J[:, 0, 2] * (2 * fx * x / z**3)
        + d_J[:, 1, 1] * (-fy / z**2)
        + d_J[:, 1, 2] * (2 * fy * y / z**3)
    )
    d_z += d_depth
    d_p_cam = np.stack([d_x, d_y, d_z], axis=1)
    d_mean = d_p_cam @ R.T  # p_cam = R^T (mu - t) => d_mu = R d_p_cam

    # color: c_k = max(0, sh_k . basis + 0.5)
    gated = d_color * screen.color_gate  # (N, 3)
    d_sh = np.einsum("nc,nb->ncb", gated, screen.basis)
    basis_grad = shlib.eval_basis_grad(screen.view_dir, model.sh_degree)  # (N, B, 3)
    d_dir = np.einsum("nc,ncb,nbi->ni", gated, model.sh, basis_grad)
    # dir = rel / |rel|: d_rel = (I - dir dir^T) / |rel| @ d_dir
    proj = d_dir - screen.view_dir * np.einsum("ni,ni->n", screen.view_dir, d_dir)[:, None]
    d_mean = d_mean + proj / screen.view_dist[:, None]

    return d_mean, d_cov, d_sh
