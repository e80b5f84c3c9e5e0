from .fuse import (
    FaceHitMaps,
    FusionReport,
    ObjectSegment,
    build_graph,
    fuse_and_filter,
    project_mask,
    reproject_iou,
    segment_scene,
)
from .louvain import LouvainResult, louvain, modularity
from .masks import (
    MaskKey,
    MaskObservation,
    apply_quality_hints,
    decode_rle,
    encode_rle,
    load_mask_dir,
    load_mask_json,
    load_mask_png,
    save_mask_png,
)

__all__ = [
    "FaceHitMaps",
    "FusionReport",
    "LouvainResult",
    "MaskKey",
    "MaskObservation",
    "ObjectSegment",
    "apply_quality_hints",
    "build_graph",
    "decode_rle",
    "encode_rle",
    "fuse_and_filter",
    "load_mask_dir",
    "load_mask_json",
    "load_mask_png",
    "louvain",
    "modularity",
    "project_mask",
    "reproject_iou",
    "save_mask_png",
    "segment_scene",
]
