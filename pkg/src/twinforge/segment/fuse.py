"""Mask-to-mesh projection voting, co-segmentation graph, and IoU-filtered fusion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import SegmentConfig
from ..geom.bvh import MeshBVH
from ..geom.camera import Camera
from .louvain import louvain
from .masks import MaskKey, MaskObservation


@dataclass
class ObjectSegment:
    object_id: int
    face_ids: np.ndarray  # sorted int64 face ids on the scene mesh
    member_masks: list[MaskKey]
    mask_iou: dict[tuple[int, int], float]
    discarded: list[MaskKey] = field(default_factory=list)


@dataclass
class FusionReport:
    segments: list[ObjectSegment]
    discarded: list[tuple[MaskKey, float]]  # mask, IoU against its fusion

    def to_dict(self) -> dict:
        return {
            "segments": [
                {
                    "object_id": s.object_id,
                    "face_ids": s.face_ids.tolist(),
                    "member_masks": [k.as_tuple() for k in s.member_masks],
                    "discarded": [k.as_tuple() for k in s.discarded],
                }
                for s in self.segments
            ],
            "discarded": [
                {"mask": k.as_tuple(), "iou": iou} for k, iou in self.discarded
            ],
        }


class FaceHitMaps:
    """Per-camera first-hit face id image, shared by projection and reprojection."""

    def __init__(self, bvh: MeshBVH, cameras: dict[int, Camera]):
        self.bvh = bvh
        self.cameras = cameras
        self._maps: dict[int, np.ndarray] = {}

    def face_map(self, camera_id: int) -> np.ndarray:
        if camera_id not in self._maps:
            cam = self.cameras[camera_id]
            self._maps[camera_id] = self.bvh.rasterize_depth(cam).face_id
        return self._maps[camera_id]

    def visible_counts(self, camera_id: int) -> np.ndarray:
        fm = self.face_map(camera_id)
        counts = np.zeros(self.bvh.mesh.n_faces, np.int64)
        hits = fm[fm >= 0]
        np.add.at(counts, hits, 1)
        return counts


def project_mask(
    obs: MaskObservation,
    hitmaps: FaceHitMaps,
    vote_fraction: float = 0.5,
) -> np.ndarray:
    """Faces whose visible pixels are covered by the mask above the vote fraction."""
    cam = hitmaps.cameras.get(obs.camera_id)
    if cam is None:
        raise ValueError(f"mask {obs.key.as_tuple()} references unknown camera {obs.camera_id}")
    obs.check_camera(cam.width, cam.height)
    fm = hitmaps.face_map(obs.camera_id)
    if not obs.mask.any():
        return np.empty(0, np.int64)
    votes = np.zeros(hitmaps.bvh.mesh.n_faces, np.int64)
    masked_faces = fm[obs.mask & (fm >= 0)]
    np.add.at(votes, masked_faces, 1)
    visible = hitmaps.visible_counts(obs.camera_id)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = votes / np.maximum(visible, 1)
    selected = np.nonzero((visible > 0) & (frac >= vote_fraction))[0]
    return selected.astype(np.int64)


def build_graph(vote_sets: list[np.ndarray]) -> np.ndarray:
    """Symmetric IoU-weighted adjacency over mask vote sets; zero edges dropped."""
    if not vote_sets:
        raise ValueError("need at least one vote set")
    n = len(vote_sets)
    sets = [frozenset(int(f) for f in s) for s in vote_sets]
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            inter = len(sets[i] & sets[j])
            if inter == 0:
                continue
            union = len(sets[i] | sets[j])
            adj[i, j] = adj[j, i] = inter / union
    return adj


def reproject_iou(
    face_ids: np.ndarray, obs: MaskObservation, hitmaps: FaceHitMaps
) -> float:
    """2D IoU between the observation and the fused face set's reprojection."""
    fm = hitmaps.face_map(obs.camera_id)
    lut = np.zeros(hitmaps.bvh.mesh.n_faces + 1, bool)
    lut[face_ids] = True
    reproj = np.zeros(fm.shape, bool)
    hit = fm >= 0
    reproj[hit] = lut[fm[hit]]
    inter = np.count_nonzero(reproj & obs.mask)
    union = np.count_nonzero(reproj | obs.mask)
    return inter / union if union else 0.0


def fuse_and_filter(
    observations: list[MaskObservation],
    vote_sets: list[np.ndarray],
    communities: np.ndarray,
    hitmaps: FaceHitMaps,
    config: SegmentConfig | None = None,
) -> FusionReport:
    """Fuse each community's votes to a face set, discard low-IoU members,
    refuse from survivors, and resolve cross-object face conflicts."""
    config = config or SegmentConfig()
    tau = config.iou_threshold
    n_faces = hitmaps.bvh.mesh.n_faces

    groups: dict[int, list[int]] = {}
    for idx, c in enumerate(communities):
        groups.setdefault(int(c), []).append(idx)

    def fused_faces(members: list[int]) -> np.ndarray:
        votes = np.zeros(n_faces, np.int64)
        for idx in members:
            votes[vote_sets[idx]] += 1
        need = config.fuse_fraction * len(members)
        return np.nonzero(votes >= max(need, 1e-9))[0]

    # deterministic object order: by smallest member key
    ordered = sorted(
        groups.items(), key=lambda kv: min(observations[i].key.as_tuple() for i in kv[1])
    )

    raw_segments = []
    discarded_all: list[tuple[MaskKey, float]] = []
    for _, members in ordered:
        fused = fused_faces(members)
        ious = {}
        kept, dropped = [], []
        for idx in members:
            iou = reproject_iou(fused, observations[idx], hitmaps) if fused.size else 0.0
            ious[observations[idx].key.as_tuple()] = iou
            if iou < tau:
                dropped.append(idx)
                discarded_all.append((observations[idx].key, iou))
            else:
                kept.append(idx)
        if not kept:
            continue
        if dropped:  # refuse from the surviving members only
            fused = fused_faces(kept)
            if not fused.size:
                continue
        raw_segments.append((kept, dropped, fused, ious))

    # resolve face conflicts: majority of member votes, then larger community
    claim: dict[int, tuple] = {}
    for seg_idx, (kept, _, fused, _) in enumerate(raw_segments):
        votes = np.zeros(n_faces, np.int64)
        for idx in kept:
            votes[vote_sets[idx]] += 1
        for f in fused:
            strength = (int(votes[f]), len(kept), -seg_idx)
            if f not in claim or strength > claim[f][0]:
                claim[f] = (strength, seg_idx)

    segments = []
    for seg_idx, (kept, dropped, fused, ious) in enumerate(raw_segments):
        final_faces = np.array(
            sorted(f for f in fused if claim[f][1] == seg_idx), np.int64
        )
        if not final_faces.size:
            continue
        segments.append(
            ObjectSegment(
                object_id=len(segments),
                face_ids=final_faces,
                member_masks=[observations[i].key for i in kept],
                mask_iou=ious,
                discarded=[observations[i].key for i in dropped],
            )
        )
    return FusionReport(segments=segments, discarded=discarded_all)


def segment_scene(
    observations: list[MaskObservation],
    bvh: MeshBVH,
    cameras: dict[int, Camera],
    config: SegmentConfig | None = None,
) -> tuple[FusionReport, np.ndarray]:
    """Full fusion pipeline: project, graph, Louvain, fuse, filter."""
    config = config or SegmentConfig()
    observations = sorted(observations, key=lambda o: o.key.as_tuple())
    hitmaps = FaceHitMaps(bvh, cameras)
    vote_sets = [project_mask(o, hitmaps, config.vote_fraction) for o in observations]
    adj = build_graph(vote_sets)
    communities = louvain(adj, resolution=config.louvain_resolution, seed=config.seed).labels
    report = fuse_and_filter(observations, vote_sets, communities, hitmaps, config)
    return report, communities
