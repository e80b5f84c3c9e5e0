from .bvh import DepthMap, MeshBVH, RayHit
from .camera import Camera, CameraError, look_at
from .mesh import (
    FaceFrame,
    FaceFrames,
    MeshError,
    TriangleMesh,
    build_face_frames,
    load_mesh,
    load_obj,
    load_ply,
    merge_meshes,
    save_obj,
    save_ply,
)

__all__ = [
    "Camera",
    "CameraError",
    "DepthMap",
    "FaceFrame",
    "FaceFrames",
    "MeshBVH",
    "MeshError",
    "RayHit",
    "TriangleMesh",
    "build_face_frames",
    "load_mesh",
    "load_obj",
    "load_ply",
    "look_at",
    "merge_meshes",
    "save_obj",
    "save_ply",
]
