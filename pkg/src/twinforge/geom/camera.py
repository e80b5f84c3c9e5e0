"""Pinhole camera: intrinsics plus a world-from-camera rigid pose.

Convention: +z forward, +y down in camera frame; pixel (u, v) has its center
at (ix + 0.5, iy + 0.5); world_from_camera is a row-major 4x4 rigid transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9


class CameraError(ValueError):
    pass


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_from_camera: np.ndarray = field(
        default_factory=lambda: np.eye(4, dtype=np.float64)
    )

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise CameraError("focal lengths must be positive")
        self.world_from_camera = np.ascontiguousarray(self.world_from_camera, np.float64)
        if self.world_from_camera.shape != (4, 4):
            raise CameraError("world_from_camera must be 4x4")
        R = self.rotation
        if not np.allclose(R @ R.T, np.eye(3), atol=ORTHO_TOL):
            raise CameraError("pose rotation is not orthonormal")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_from_camera[:3, :3]

    @property
    def center(self) -> np.ndarray:
        """Camera origin in world coordinates."""
        return self.world_from_camera[:3, 3]

    @property
    def cam_from_world(self) -> np.ndarray:
        R = self.rotation
        t = self.center
        out = np.eye(4)
        out[:3, :3] = R.T
        out[:3, 3] = -R.T @ t
        return out

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return (pts - self.center) @ self.rotation

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World points -> (pixel uv, camera-space depth z). z <= 0 means behind."""
        p = self.to_camera(points)
        z = p[:, 2]
        safe = np.where(np.abs(z) < 1e-12, 1e-12, z)
        u = self.fx * p[:, 0] / safe + self.cx
        v = self.fy * p[:, 1] / safe + self.cy
        return np.stack([u, v], axis=1), z

    def pixel_rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit world-space ray per pixel center. Returns (origin(3,), dirs(H, W, 3))."""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width]
        d = np.stack(
            [
                (xs + 0.5 - self.cx) / self.fx,
                (ys + 0.5 - self.cy) / self.fy,
                np.ones_like(xs, dtype=np.float64),
            ],
            axis=-1,
        )
        d = d @ self.rotation.T
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return self.center.copy(), d

    def ray_through_pixel(self, u: float, v: float) -> tuple[np.ndarray, np.ndarray]:
        d = np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])
        d = self.rotation @ d
        return self.center.copy(), d / np.linalg.norm(d)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "world_from_camera": self.world_from_camera.reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
            world_from_camera=np.array(d["world_from_camera"], np.float64).reshape(4, 4),
        )


def look_at(
    eye: np.ndarray,
    target: np.ndarray,
    up: np.ndarray = (0.0, 0.0, 1.0),
    fov_deg: float = 60.0,
    width: int = 128,
    height: int = 128,
) -> Camera:
    """Camera at `eye` looking at `target` with the image's up opposing world `up`."""
    eye = np.asarray(eye, np.float64)
    fwd = np.asarray(target, np.float64) - eye
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(up, np.float64)
    right = np.cross(fwd, up)
    nr = np.linalg.norm(right)
    if nr < 1e-9:  # looking along up; pick an arbitrary right
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        nr = np.linalg.norm(right)
    right /= nr
    down = np.cross(fwd, right)  # +y is down in camera frame
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = down
    pose[:3, 2] = fwd
    pose[:3, 3] = eye
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
    return Camera(f, f, width / 2, height / 2, width, height, pose)
