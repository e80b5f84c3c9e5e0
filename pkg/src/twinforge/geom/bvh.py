"""BVH over a triangle mesh: raycast, closest point, winding-number sign.

The tree is immutable after build; all queries are read-only and safe to run
concurrently. Sign of distance comes from the generalized winding number
(threshold 0.5), which tolerates small holes in real reconstructions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _mesh_kernels as mk
from .camera import Camera
from .mesh import TriangleMesh

LEAF_SIZE = 4
SAH_BINS = 16
WINDING_CONFIDENT = 0.25  # |w - {0,1}| above this flags a non-watertight query


@dataclass
class RayHit:
    face_id: int
    bary: np.ndarray  # (3,) weights for the face's vertices, sum to 1
    depth: float  # distance along the (unit) ray

    def point(self, mesh: TriangleMesh) -> np.ndarray:
        a, b, c = mesh.vertices[mesh.faces[self.face_id]]
        return self.bary[0] * a + self.bary[1] * b + self.bary[2] * c


@dataclass
class DepthMap:
    depth: np.ndarray  # (H, W) camera-space z, inf where empty
    face_id: np.ndarray  # (H, W) int32, -1 where empty
    ray_t: np.ndarray  # (H, W) distance along unit ray
    bary_u: np.ndarray
    bary_v: np.ndarray


class MeshBVH:
    def __init__(self, mesh: TriangleMesh):
        mesh.validate()
        self.mesh = mesh
        a, b, c = mesh.triangle_corners()
        self.va = np.ascontiguousarray(a)
        self.vb = np.ascontiguousarray(b)
        self.vc = np.ascontiguousarray(c)
        (
            self.bb_min,
            self.bb_max,
            self.node_left,
            self.node_right,
            self.node_start,
            self.node_count,
            self.prim_order,
        ) = _build_bvh(self.va, self.vb, self.vc)

    # -- internal: pass the flat arrays to kernels in one tuple ---------------
    @property
    def _nodes(self):
        return (
            self.bb_min,
            self.bb_max,
            self.node_left,
            self.node_right,
            self.node_start,
            self.node_count,
            self.prim_order,
        )

    def raycast(
        self, origin: np.ndarray, direction: np.ndarray, cull_backfaces: bool = True
    ) -> RayHit | None:
        """Nearest (by default front-facing) intersection, or None on a miss."""
        direction = np.asarray(direction, np.float64)
        n = np.linalg.norm(direction)
        if not np.isfinite(n) or n < 1e-12:
            raise ValueError("ray direction must be a nonzero finite vector")
        direction = direction / n
        f, t, u, v = mk.raycast_one(
            np.asarray(origin, np.float64), direction, *self._nodes,
            self.va, self.vb, self.vc, cull_backfaces,
        )
        if f < 0:
            return None
        bary = np.array([1.0 - u - v, u, v])
        bary = np.maximum(bary, 0.0)
        bary /= bary.sum()
        return RayHit(int(f), bary, float(t))

    def raycast_batch(
        self, origins: np.ndarray, directions: np.ndarray, cull_backfaces: bool = True
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized raycast; returns (face_id, t, u, v) with face_id < 0 for misses."""
        origins = np.ascontiguousarray(origins, np.float64)
        directions = np.ascontiguousarray(directions, np.float64)
        directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
        n = len(origins)
        out_face = np.empty(n, np.int64)
        out_t = np.empty(n, np.float64)
        out_u = np.empty(n, np.float64)
        out_v = np.empty(n, np.float64)
        mk.raycast_many(
            origins, directions, *self._nodes, self.va, self.vb, self.vc,
            cull_backfaces, out_face, out_t, out_u, out_v,
        )
        return out_face, out_t, out_u, out_v

    def rasterize_depth(self, camera: Camera, cull_backfaces: bool = False) -> DepthMap:
        """Nearest-surface z-depth at pixel centers; empty pixels are +inf."""
        origin, dirs = camera.pixel_rays()
        h, w = dirs.shape[:2]
        out_t = np.empty((h, w), np.float64)
        out_face = np.empty((h, w), np.int32)
        out_u = np.empty((h, w), np.float64)
        out_v = np.empty((h, w), np.float64)
        mk.raycast_grid(
            origin, np.ascontiguousarray(dirs), *self._nodes,
            self.va, self.vb, self.vc, cull_backfaces,
            out_t, out_face, out_u, out_v,
        )
        forward = camera.rotation[:, 2]
        cosines = dirs @ forward
        depth = np.where(np.isfinite(out_t), out_t * cosines, np.inf)
        return DepthMap(depth, out_face, out_t, out_u, out_v)

    def closest_points(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unsigned distance, nearest face id, and nearest surface point per query."""
        points = np.ascontiguousarray(np.atleast_2d(points), np.float64)
        n = len(points)
        out_face = np.empty(n, np.int64)
        out_d2 = np.empty(n, np.float64)
        out_q = np.empty((n, 3), np.float64)
        mk.closest_point_many(
            points, *self._nodes, self.va, self.vb, self.vc, out_face, out_d2, out_q
        )
        return np.sqrt(out_d2), out_face, out_q

    def winding(self, points: np.ndarray) -> np.ndarray:
        points = np.ascontiguousarray(np.atleast_2d(points), np.float64)
        out = np.empty(len(points), np.float64)
        mk.winding_numbers(points, self.va, self.vb, self.vc, out)
        return out

    def signed_distance(
        self, points: np.ndarray, return_confidence: bool = False
    ) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
        """Distance to the surface, negative inside (winding number > 0.5).

        With return_confidence, also returns a bool array that is False where
        the winding number is far from both 0 and 1 (non-watertight region, the
        sign is then a best guess).
        """
        d, _, _ = self.closest_points(points)
        w = self.winding(points)
        signed = np.where(w > 0.5, -d, d)
        if return_confidence:
            confident = np.minimum(np.abs(w), np.abs(1.0 - w)) <= WINDING_CONFIDENT
            return signed, confident
        return signed


def _build_bvh(va: np.ndarray, vb: np.ndarray, vc: np.ndarray):
    """Binned-SAH top-down build over face bounding boxes."""
    m = len(va)
    tri_min = np.minimum(np.minimum(va, vb), vc)
    tri_max = np.maximum(np.maximum(va, vb), vc)
    centroids = (tri_min + tri_max) * 0.5
    prim_order = np.arange(m, dtype=np.int64)

    bb_min: list[np.ndarray] = []
    bb_max: list[np.ndarray] = []
    left: list[int] = []
    right: list[int] = []
    start: list[int] = []
    count: list[int] = []

    def new_node() -> int:
        bb_min.append(np.zeros(3))
        bb_max.append(np.zeros(3))
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(count) - 1

    root = new_node()
    stack = [(root, 0, m, 0)]
    while stack:
        node, lo, hi, depth = stack.pop()
        ids = prim_order[lo:hi]
        nb_min = tri_min[ids].min(axis=0)
        nb_max = tri_max[ids].max(axis=0)
        bb_min[node] = nb_min
        bb_max[node] = nb_max
        n = hi - lo
        if n <= LEAF_SIZE or depth >= 40:
            start[node] = lo
            count[node] = n
            continue
        cent = centroids[ids]
        c_min = cent.min(axis=0)
        c_max = cent.max(axis=0)
        axis = int(np.argmax(c_max - c_min))
        span = c_max[axis] - c_min[axis]
        if span < 1e-12:
            start[node] = lo
            count[node] = n
            continue
        # binned SAH along the widest centroid axis
        rel = (cent[:, axis] - c_min[axis]) / span
        bins = np.minimum((rel * SAH_BINS).astype(np.int64), SAH_BINS - 1)
        best_cost = np.inf
        best_split = -1
        counts = np.bincount(bins, minlength=SAH_BINS)
        ext = nb_max - nb_min
        other = ext[np.arange(3) != axis]
        for s in range(1, SAH_BINS):
            n_l = counts[:s].sum()
            n_r = n - n_l
            if n_l == 0 or n_r == 0:
                continue
            w_l = span * s / SAH_BINS
            w_r = span - w_l
            area_l = 2 * (w_l * other[0] + w_l * other[1] + other[0] * other[1])
            area_r = 2 * (w_r * other[0] + w_r * other[1] + other[0] * other[1])
            cost = area_l * n_l + area_r * n_r
            if cost < best_cost:
                best_cost = cost
                best_split = s
        if best_split < 0:
            mid = lo + n // 2
            order = np.argsort(cent[:, axis], kind="stable")
        else:
            mask = bins < best_split
            order = np.argsort(~mask, kind="stable")
            mid = lo + int(mask.sum())
        prim_order[lo:hi] = ids[order]
        if mid == lo or mid == hi:
            mid = lo + n // 2
        l = new_node()
        r = new_node()
        left[node] = l
        right[node] = r
        stack.append((l, lo, mid, depth + 1))
        stack.append((r, mid, hi, depth + 1))

    return (
        np.ascontiguousarray(bb_min, np.float64),
        np.ascontiguousarray(bb_max, np.float64),
        np.array(left, np.int32),
        np.array(right, np.int32),
        np.array(start, np.int32),
        np.array(count, np.int32),
        prim_order,
    )
