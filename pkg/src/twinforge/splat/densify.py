"""Adaptive density control: face-local split/clone, opacity/size pruning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import SplatModel
from .ste import project_simplex
from .train import DensifyStats, Trainer


@dataclass
class DensifyReport:
    n_before: int
    n_after: int
    n_split: int
    n_cloned: int
    n_pruned: int
    # one row per split: parent scales before, linear domain; children occupy
    # the last n_split rows of the updated model
    split_parent_scales: np.ndarray = field(default=None)
    split_parent_faces: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {
            "n_before": self.n_before,
            "n_after": self.n_after,
            "n_split": self.n_split,
            "n_cloned": self.n_cloned,
            "n_pruned": self.n_pruned,
        }


def densify_and_prune(trainer: Trainer, rng: np.random.Generator) -> DensifyReport:
    """Split large high-gradient splats, clone small ones, prune faint/huge ones."""
    c = trainer.config
    model = trainer.model
    frames = trainer.frames
    stats = trainer.stats
    n = len(model)

    mean_grad = stats.mean_grad()
    opacity = model.opacity()
    prune = (opacity < c.prune_opacity) | (stats.max_radius_frac > c.prune_screen_fraction)
    if prune.all():  # never empty the set; an empty scene cannot recover
        prune[:] = False

    tau_s = c.scale_threshold_inradii * float(np.median(frames.inradius))
    in_plane = np.exp(model.log_scales[:, :2]).max(axis=1)
    hot = (mean_grad > c.grad_threshold) & ~prune
    split = hot & (in_plane > tau_s)
    clone = hot & ~(in_plane > tau_s)

    survivors = np.where(~prune)[0]
    index_map = [survivors]
    parts = [model.select(survivors)]

    clone_ids = np.where(clone)[0]
    if clone_ids.size:
        parts.append(model.select(clone_ids))
        index_map.append(np.full(clone_ids.size, -1))

    split_ids = np.where(split)[0]
    report_parent_scales = np.zeros((split_ids.size, 3))
    if split_ids.size:
        parent_scales = np.exp(model.log_scales[split_ids])
        child_scales = parent_scales / c.split_scale_divisor
        report_parent_scales = parent_scales.copy()

        children = model.select(split_ids)
        # jitter within the face plane, bounded by a fraction of the inradius
        fid = children.face_id
        inr = frames.inradius[fid]
        theta = rng.uniform(0, 2 * np.pi, size=split_ids.size)
        r = rng.uniform(0, 1, size=split_ids.size) * c.split_jitter_inradii * inr
        offset = (
            np.cos(theta)[:, None] * frames.t_u[fid] + np.sin(theta)[:, None] * frames.t_v[fid]
        ) * r[:, None]
        a, b, cr = (arr[fid] for arr in frames.corners)
        e1 = b - a
        e2 = cr - a
        # solve the 2x2 tangent-plane system for barycentric deltas
        m11 = np.einsum("ni,ni->n", e1, e1)
        m12 = np.einsum("ni,ni->n", e1, e2)
        m22 = np.einsum("ni,ni->n", e2, e2)
        r1 = np.einsum("ni,ni->n", e1, offset)
        r2 = np.einsum("ni,ni->n", e2, offset)
        det = m11 * m22 - m12 * m12
        det = np.where(np.abs(det) < 1e-18, 1e-18, det)
        db1 = (m22 * r1 - m12 * r2) / det
        db2 = (m11 * r2 - m12 * r1) / det
        children.bary = project_simplex(
            project_simplex(children.bary) + np.stack([db1, db2], axis=1)
        )
        children.log_scales = np.log(child_scales)
        parts.append(children)
        index_map.append(np.full(split_ids.size, -1))

        # the parent is rescaled in place (among survivors)
        surv_pos = -np.ones(n, np.int64)
        surv_pos[survivors] = np.arange(survivors.size)
        parent_rows = surv_pos[split_ids]
        parts[0].log_scales[parent_rows] = np.log(child_scales)

    new_model = SplatModel.concatenate(parts) if len(parts) > 1 else parts[0]
    full_map = np.concatenate(index_map)
    trainer.model = new_model
    trainer.optimizer.extend(full_map, len(new_model))
    trainer.stats = DensifyStats.zeros(len(new_model))

    return DensifyReport(
        n_before=n,
        n_after=len(new_model),
        n_split=int(split_ids.size),
        n_cloned=int(clone_ids.size),
        n_pruned=int(prune.sum()),
        split_parent_scales=report_parent_scales,
        split_parent_faces=model.face_id[split_ids].copy(),
    )
