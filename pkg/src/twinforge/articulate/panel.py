"""Oriented-rectangle fits for object segments (the substrate for axis estimation)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import ArticulateConfig
from ..geom.mesh import TriangleMesh


class PanelError(ValueError):
    pass


@dataclass
class PanelFrame:
    center: np.ndarray  # (3,)
    normal: np.ndarray  # unit
    major_axis: np.ndarray  # unit, in-plane, longest extent
    minor_axis: np.ndarray  # unit, in-plane
    major_extent: float
    minor_extent: float
    rms_residual: float
    planar: bool  # False when the plane fit is poor (heuristic result)

    @property
    def aspect_ratio(self) -> float:
        return self.major_extent / max(self.minor_extent, 1e-12)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.major_extent, self.minor_extent))

    def corners(self) -> np.ndarray:
        """(4, 3) rectangle corners, counter-clockwise around the normal."""
        u = self.major_axis * self.major_extent / 2
        v = self.minor_axis * self.minor_extent / 2
        return np.array(
            [self.center - u - v, self.center + u - v, self.center + u + v, self.center - u + v]
        )


def min_area_rect(points2: np.ndarray) -> tuple[float, float, float]:
    """Minimum-area bounding rectangle of 2D points.

    Returns (angle, extent_u, extent_v): one rectangle side is collinear with a
    convex-hull edge (rotating-calipers property), so every hull-edge angle is
    tried exactly.
    """
    hull = _convex_hull(points2)
    if len(hull) == 1:
        return 0.0, 0.0, 0.0
    best = None
    m = len(hull)
    for i in range(m):
        e = hull[(i + 1) % m] - hull[i]
        norm = np.hypot(e[0], e[1])
        if norm < 1e-15:
            continue
        ang = np.arctan2(e[1], e[0])
        c, s = np.cos(-ang), np.sin(-ang)
        rot = points2 @ np.array([[c, -s], [s, c]]).T
        ext = rot.max(axis=0) - rot.min(axis=0)
        area = ext[0] * ext[1]
        if best is None or area < best[0] - 1e-15:
            best = (area, ang, ext[0], ext[1])
    _, ang, eu, ev = best
    return ang, float(eu), float(ev)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and np.cross(out[-1] - out[-2], p - out[-2]) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def fit_panel_frame(
    segment_faces: np.ndarray,
    mesh: TriangleMesh,
    config: ArticulateConfig | None = None,
) -> PanelFrame:
    """Least-squares plane over area-weighted face centroids, then a min-area
    rectangle of the segment's vertices in that plane."""
    config = config or ArticulateConfig()
    segment_faces = np.asarray(segment_faces, np.int64)
    if segment_faces.size < config.min_faces:
        raise PanelError(
            f"segment has {segment_faces.size} faces; need >= {config.min_faces}"
        )
    tris = mesh.faces[segment_faces]
    a = mesh.vertices[tris[:, 0]]
    b = mesh.vertices[tris[:, 1]]
    c = mesh.vertices[tris[:, 2]]
    cross = np.cross(b - a, c - a)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    weights = areas / areas.sum()
    centroids = (a + b + c) / 3.0
    center = (weights[:, None] * centroids).sum(axis=0)

    # weighted PCA: normal = least-variance direction
    d = centroids - center
    cov = (weights[:, None, None] * d[:, :, None] * d[:, None, :]).sum(axis=0)
    eigval, eigvec = np.linalg.eigh(cov)
    normal = eigvec[:, 0]
    # orient along the area-weighted mean face normal
    mean_n = (weights[:, None] * cross / (2 * areas[:, None])).sum(axis=0)
    if normal @ mean_n < 0:
        normal = -normal

    verts = np.unique(tris.reshape(-1))
    pts = mesh.vertices[verts]
    offs = (pts - center) @ normal
    rms = float(np.sqrt(np.mean(offs**2)))

    # in-plane basis for the rectangle search
    t1 = eigvec[:, 2]
    t1 = t1 - (t1 @ normal) * normal
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    p2 = np.stack([(pts - center) @ t1, (pts - center) @ t2], axis=1)
    ang, eu, ev = min_area_rect(p2)
    axis_u = np.cos(ang) * t1 + np.sin(ang) * t2
    axis_v = np.cross(normal, axis_u)
    # rectangle center in-plane (bounding box midpoint)
    ru = p2 @ np.array([np.cos(ang), np.sin(ang)])
    rv = p2 @ np.array([-np.sin(ang), np.cos(ang)])
    mid = (
        center
        + (ru.max() + ru.min()) / 2 * axis_u
        + (rv.max() + rv.min()) / 2 * axis_v
    )
    if ev > eu:
        axis_u, axis_v, eu, ev = axis_v, -axis_u, ev, eu

    diag = float(np.hypot(eu, ev))
    planar = rms <= config.plane_residual_fraction * max(diag, 1e-12)
    return PanelFrame(
        center=mid,
        normal=normal,
        major_axis=axis_u,
        minor_axis=axis_v,
        major_extent=eu,
        minor_extent=ev,
        rms_residual=rms,
        planar=planar,
    )
