"""Dataclass configs for every stage, with TOML/JSON loading and stable hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path


@dataclass
class SplatTrainConfig:
    iterations: int = 2000
    sh_degree: int = 3
    position_mode: str = "ste"  # ste | clip | static
    kappa: float = 1.0  # normal-offset bound as a multiple of face inradius
    lambda_rgb: float = 1.0
    lambda_depth: float = 0.1
    lambda_normal_scale: float = 0.01
    # per-field learning rates; position-like rates are multiplied by scene extent
    lr_position: float = 1.6e-4
    lr_tilt: float = 1e-3
    lr_scales: float = 5e-3
    lr_opacity: float = 5e-2
    lr_sh: float = 2.5e-3
    # density control
    densify_every: int = 100
    densify_start: int = 300
    densify_stop_fraction: float = 0.6  # stop at this fraction of iterations
    grad_threshold: float = 2e-4
    scale_threshold_inradii: float = 6.0  # in units of median inradius
    prune_opacity: float = 0.005
    prune_screen_fraction: float = 0.15  # of image width
    split_jitter_inradii: float = 0.25
    split_scale_divisor: float = 1.6
    # rasterizer economics
    tile_size: int = 16
    transmittance_min: float = 1e-4
    alpha_min: float = 1.0 / 255.0
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    deterministic: bool = True
    seed: int = 0


@dataclass
class SegmentConfig:
    vote_fraction: float = 0.5  # face joins a mask's set above this visible-pixel fraction
    fuse_fraction: float = 0.5  # face joins the fused set above this member-mask fraction
    iou_threshold: float = 0.5
    quality_threshold: float = 0.5
    louvain_resolution: float = 1.0
    seed: int = 0


@dataclass
class ArticulateConfig:
    aspect_ratio_threshold: float = 1.8
    horizontal_max_up_component: float = 0.5
    geometric_confidence: float = 0.5
    match_iou: float = 0.5
    handle_protrusion: float = 0.005  # meters off the panel plane
    min_faces: int = 10
    plane_residual_fraction: float = 0.1  # of segment diagonal
    up_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)


@dataclass
class AmodalConfig:
    w_mask: float = 1.0
    w_shape: float = 10.0
    w_struc: float = 100.0
    w_pen: float = 1000.0
    stage1_iters: int = 300
    stage2_iters: int = 500
    step_size: float = 1e-2
    silhouette_sharpness: float = 2.0  # pixels
    adjacency_threshold_thickness: float = 2.0  # in units of part thickness
    penetration_epsilon: float = 1e-6  # m^3
    samples_per_part: int = 256
    interior_darken: float = 0.8


@dataclass
class SimConfig:
    stiffness: float = 100.0
    mass: float = 1.0
    friction: float = 0.5
    damping_ratio: float = 1.0  # critically damped
    duration: float = 2.5
    resample_length: int = 64
    revolute_limits: tuple[float, float] = (0.0, 1.5707963267948966)
    prismatic_travel_fraction: float = 0.45  # of cabinet depth


@dataclass
class ServiceConfig:
    port: int = 8712
    max_sessions: int = 8
    fps_cap: float = 30.0
    jpeg_quality: int = 85
    session_reap_seconds: float = 60.0
    penetration_epsilon: float = 1e-3


@dataclass
class TwinforgeConfig:
    seed: int = 0
    splat: SplatTrainConfig = field(default_factory=SplatTrainConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    articulate: ArticulateConfig = field(default_factory=ArticulateConfig)
    amodal: AmodalConfig = field(default_factory=AmodalConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "TwinforgeConfig":
        return _dataclass_from_dict(cls, data)

    @classmethod
    def load(cls, path: str | Path) -> "TwinforgeConfig":
        path = Path(path)
        if path.suffix.lower() == ".json":
            data = json.loads(path.read_text())
        elif path.suffix.lower() == ".toml":
            try:
                import tomllib  # py311+
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(path.read_text())
        else:
            raise ValueError(f"config must be .toml or .json, got {path.suffix}")
        return cls.from_dict(data)


def _dataclass_from_dict(cls, data: dict):
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if is_dataclass(f.type) if isinstance(f.type, type) else False:
            kwargs[f.name] = _dataclass_from_dict(f.type, value)
        elif f.name in _NESTED:
            kwargs[f.name] = _dataclass_from_dict(_NESTED[f.name], value)
        elif isinstance(value, list):
            kwargs[f.name] = tuple(value)
        else:
            kwargs[f.name] = value
    return cls(**kwargs)


_NESTED = {
    "splat": SplatTrainConfig,
    "segment": SegmentConfig,
    "articulate": ArticulateConfig,
    "amodal": AmodalConfig,
    "sim": SimConfig,
    "service": ServiceConfig,
}
