"""Joint type classification and axis fitting from panel geometry plus hints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import ArticulateConfig
from ..geom.bvh import MeshBVH
from ..geom.camera import Camera
from ..geom.mesh import TriangleMesh
from .panel import PanelFrame

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


class AxisUndetermined(ValueError):
    pass


@dataclass
class Joint:
    type: str  # revolute | prismatic
    axis_point: np.ndarray  # point on the axis line (revolute) or panel center
    axis_dir: np.ndarray  # unit direction
    limits: tuple[float, float]
    value: float = 0.0
    confidence: float = 1.0
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.axis_point = np.asarray(self.axis_point, np.float64)
        d = np.asarray(self.axis_dir, np.float64)
        n = np.linalg.norm(d)
        if n < 1e-12:
            raise ValueError("joint axis direction must be nonzero")
        self.axis_dir = d / n

    def to_dict(self) -> dict:
        return {
            "type": self.type,
            "axis_point": self.axis_point.tolist(),
            "axis_dir": self.axis_dir.tolist(),
            "limits": list(self.limits),
            "value": self.value,
            "confidence": self.confidence,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Joint":
        return cls(
            type=d["type"],
            axis_point=np.array(d["axis_point"], float),
            axis_dir=np.array(d["axis_dir"], float),
            limits=tuple(d["limits"]),
            value=float(d.get("value", 0.0)),
            confidence=float(d.get("confidence", 1.0)),
            flags=list(d.get("flags", [])),
        )


@dataclass
class ArticulationHint:
    object_id: int
    source: str
    type_vote: str | None = None
    hinge_px: np.ndarray | None = None  # (2, 2) endpoints in pixels
    camera_id: int | None = None
    confidence: float = 0.5

    @classmethod
    def from_dict(cls, d: dict) -> "ArticulationHint":
        hinge = d.get("hinge_px")
        return cls(
            object_id=int(d["object_id"]),
            source=str(d.get("source", "hint")),
            type_vote=d.get("type_vote"),
            hinge_px=None if hinge is None else np.asarray(hinge, float),
            camera_id=d.get("camera_id"),
            confidence=float(d.get("confidence", 0.5)),
        )


def classify_joint(
    panel: PanelFrame,
    hints: list[ArticulationHint],
    config: ArticulateConfig | None = None,
) -> tuple[str, float]:
    """Confidence-weighted majority over the geometric vote and hint votes.

    Geometric rule: a wide panel (aspect ratio above threshold) whose long
    side runs horizontally is a drawer front (prismatic); otherwise revolute.
    Exact ties go to the single highest-confidence hint, else the geometry.
    """
    config = config or ArticulateConfig()
    up = np.asarray(config.up_axis, float)
    up = up / np.linalg.norm(up)
    horizontal = abs(panel.major_axis @ up) < config.horizontal_max_up_component
    geo_type = (
        PRISMATIC
        if (panel.aspect_ratio >= config.aspect_ratio_threshold and horizontal)
        else REVOLUTE
    )
    votes: dict[str, float] = {geo_type: config.geometric_confidence}
    for h in hints:
        if h.type_vote is None:
            continue
        votes[h.type_vote] = votes.get(h.type_vote, 0.0) + h.confidence
    ranked = sorted(votes.items(), key=lambda kv: -kv[1])
    if len(ranked) > 1 and abs(ranked[0][1] - ranked[1][1]) < 1e-12:
        # arbitration: strongest single hint, else the geometric vote
        hinted = [h for h in hints if h.type_vote is not None]
        if hinted:
            best = max(hinted, key=lambda h: h.confidence)
            return best.type_vote, best.confidence
        return geo_type, config.geometric_confidence
    total = sum(votes.values())
    return ranked[0][0], ranked[0][1] / total


def detect_handle(
    segment_faces: np.ndarray,
    mesh: TriangleMesh,
    panel: PanelFrame,
    protrusion: float,
) -> np.ndarray | None:
    """Centroid of the densest face cluster protruding off the panel plane."""
    tris = mesh.faces[np.asarray(segment_faces, np.int64)]
    cent = mesh.vertices[tris].mean(axis=1)
    off = np.abs((cent - panel.center) @ panel.normal)
    mask = off >= protrusion
    if not mask.any():
        return None
    return cent[mask].mean(axis=0)


def fit_revolute_axis(
    segment_faces: np.ndarray,
    mesh: TriangleMesh,
    panel: PanelFrame,
    hints: list[ArticulationHint],
    cameras: dict[int, Camera] | None = None,
    bvh: MeshBVH | None = None,
    config: ArticulateConfig | None = None,
) -> Joint:
    """Pick the hinge edge of the fitted rectangle.

    Candidates are the two edges perpendicular to the major axis (the short
    sides) when the panel is taller than wide, else the top/bottom edges. A 2D
    hinge hint is lifted by raycast and snaps to the nearest candidate;
    otherwise the edge opposite the detected handle wins, falling back to the
    leftmost edge flagged low-confidence.
    """
    config = config or ArticulateConfig()
    up = np.asarray(config.up_axis, float)
    up = up / np.linalg.norm(up)
    # Hinges live on the long edges: the vertical sides of a tall door and the
    # top/bottom of a panel wider than tall are both the edges along the major
    # axis, offset by half the minor extent.
    u = panel.major_axis * panel.major_extent / 2
    v = panel.minor_axis * panel.minor_extent / 2
    edges = [
        (panel.center - v - u, panel.center - v + u),
        (panel.center + v - u, panel.center + v + u),
    ]
    candidates = []
    for p0, p1 in edges:
        mid = (p0 + p1) / 2
        direction = p1 - p0
        candidates.append((mid, direction / np.linalg.norm(direction)))

    flags: list[str] = []
    chosen = None
    hinge_hints = [h for h in hints if h.hinge_px is not None]
    if hinge_hints and cameras is not None and bvh is not None:
        h = max(hinge_hints, key=lambda x: x.confidence)
        cam = cameras.get(h.camera_id)
        if cam is not None:
            pts3 = []
            for uv in h.hinge_px:
                origin, direction = cam.ray_through_pixel(uv[0], uv[1])
                hit = bvh.raycast(origin, direction, cull_backfaces=False)
                if hit is not None:
                    pts3.append(hit.point(bvh.mesh))
            if len(pts3) == 2:
                hinge_mid = (pts3[0] + pts3[1]) / 2
                dists = [np.linalg.norm(hinge_mid - mid) for mid, _ in candidates]
                chosen = candidates[int(np.argmin(dists))]
            else:
                flags.append("hint-off-mesh")
    if chosen is None:
        handle = detect_handle(segment_faces, mesh, panel, config.handle_protrusion)
        if handle is not None:
            dists = [np.linalg.norm(handle - mid) for mid, _ in candidates]
            chosen = candidates[int(np.argmax(dists))]  # hinge opposes the handle
        else:
            # leftmost edge in a deterministic in-plane frame
            lateral = np.cross(up, panel.normal)
            ln = np.linalg.norm(lateral)
            if ln < 1e-9:
                raise AxisUndetermined("panel normal is parallel to up; no leftmost edge")
            lateral /= ln
            sides = [mid @ lateral for mid, _ in candidates]
            chosen = candidates[int(np.argmin(sides))]
            flags.append("leftmost-fallback")

    mid, direction = chosen
    if direction @ up < 0 and abs(direction @ up) > 0.5:
        direction = -direction  # hinge axes point along +up when vertical
    return Joint(
        type=REVOLUTE,
        axis_point=mid,
        axis_dir=direction,
        limits=(0.0, np.pi / 2),
        confidence=0.4 if "leftmost-fallback" in flags else 0.9,
        flags=flags,
    )


def fit_prismatic_axis(
    panel: PanelFrame,
    bvh: MeshBVH,
    travel: float | None = None,
    probe_distance: float = 0.05,
) -> Joint:
    """Slide direction = outward panel normal, signed by an interior probe."""
    n = panel.normal.copy()
    probe_out = panel.center + n * probe_distance
    probe_in = panel.center - n * probe_distance
    d_out = bvh.signed_distance(probe_out[None])[0]
    d_in = bvh.signed_distance(probe_in[None])[0]
    if d_out < d_in:  # +n points into the scene; flip outward
        n = -n
    return Joint(
        type=PRISMATIC,
        axis_point=panel.center,
        axis_dir=n,
        limits=(0.0, travel if travel is not None else 0.4),
        confidence=0.9,
    )
