"""Synthetic fixtures: a textured cube for splat training and a cabinet wall
scene with articulated fronts for the segmentation/articulation/sim stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geom import Camera, MeshBVH, TriangleMesh, look_at, merge_meshes


def subdivided_cube(n: int = 6, size: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned cube with each face split into an n x n quad grid."""
    half = size / 2.0
    c = np.asarray(center, float)
    verts: list[np.ndarray] = []
    faces: list[list[int]] = []

    def add_face(origin, du, dv):
        base = len(verts)
        for j in range(n + 1):
            for i in range(n + 1):
                verts.append(origin + du * (i / n) + dv * (j / n))
        for j in range(n):
            for i in range(n):
                a = base + j * (n + 1) + i
                b = a + 1
                d = a + (n + 1)
                e = d + 1
                faces.append([a, b, e])
                faces.append([a, e, d])

    o = c - half
    ex = np.array([size, 0, 0.0])
    ey = np.array([0, size, 0.0])
    ez = np.array([0, 0, size])
    specs = [
        (o + ez, ex, ey),  # +z (du x dv points out)
        (o, ey, ex),       # -z
        (o, ex, ez),       # -y
        (o + ey, ez, ex),  # +y
        (o, ez, ey),       # -x
        (o + ex, ey, ez),  # +x
    ]
    for origin, du, dv in specs:
        add_face(origin, du, dv)
    return TriangleMesh(np.array(verts), np.array(faces, np.int32))


def cube_texture(points: np.ndarray) -> np.ndarray:
    """Procedural RGB on the cube surface: checker plus smooth color ramps."""
    p = np.atleast_2d(points)
    checker = (
        np.floor(p[:, 0] * 4 + 100) + np.floor(p[:, 1] * 4 + 100) + np.floor(p[:, 2] * 4 + 100)
    ) % 2
    r = 0.25 + 0.5 * checker + 0.2 * np.sin(6.0 * p[:, 0] + 2.0 * p[:, 1])
    g = 0.35 + 0.4 * (1 - checker) + 0.25 * np.sin(5.0 * p[:, 1] + 1.0)
    b = 0.3 + 0.3 * checker * np.cos(4.0 * p[:, 2]) + 0.25 * np.cos(7.0 * p[:, 0] * p[:, 1])
    return np.clip(np.stack([r, g, b], axis=1), 0.0, 1.0)


def orbit_cameras(
    n: int,
    radius: float = 3.0,
    target=(0.0, 0.0, 0.0),
    elevations=(0.35, -0.25),
    width: int = 128,
    height: int = 128,
    fov_deg: float = 50.0,
) -> list[Camera]:
    cams = []
    target = np.asarray(target, float)
    for i in range(n):
        ang = 2 * np.pi * i / n
        elev = elevations[i % len(elevations)]
        eye = target + radius * np.array(
            [np.cos(ang) * np.cos(elev), np.sin(ang) * np.cos(elev), np.sin(elev)]
        )
        cams.append(look_at(eye, target, up=(0, 0, 1), fov_deg=fov_deg,
                            width=width, height=height))
    return cams


@dataclass
class SyntheticDataset:
    mesh: TriangleMesh
    cameras: list[Camera]
    images: list[np.ndarray]  # (H, W, 3) in [0, 1]
    depths: list[np.ndarray]  # (H, W) camera z, inf on background
    eval_cameras: list[Camera] = field(default_factory=list)
    eval_images: list[np.ndarray] = field(default_factory=list)
    background: tuple = (0.1, 0.1, 0.1)


def render_mesh_image(
    bvh: MeshBVH,
    camera: Camera,
    texture_fn,
    background=(0.1, 0.1, 0.1),
) -> tuple[np.ndarray, np.ndarray]:
    """Ray-rasterized ground-truth image + depth for a textured mesh."""
    dm = bvh.rasterize_depth(camera)
    h, w = dm.depth.shape
    img = np.empty((h, w, 3))
    img[:] = np.asarray(background, float)
    hit = dm.face_id >= 0
    if hit.any():
        fids = dm.face_id[hit]
        tris = bvh.mesh.faces[fids]
        a = bvh.mesh.vertices[tris[:, 0]]
        b = bvh.mesh.vertices[tris[:, 1]]
        c = bvh.mesh.vertices[tris[:, 2]]
        u = dm.bary_u[hit][:, None]
        v = dm.bary_v[hit][:, None]
        pts = a * (1 - u - v) + b * u + c * v
        img[hit] = texture_fn(pts)
    return img, dm.depth


def textured_cube_dataset(
    n_train: int = 24,
    n_eval: int = 4,
    resolution: int = 128,
    subdivisions: int = 6,
) -> SyntheticDataset:
    """The 24-view textured-cube benchmark used by the training acceptance runs."""
    mesh = subdivided_cube(n=subdivisions, size=1.6)
    bvh = MeshBVH(mesh)
    cams = orbit_cameras(
        n_train + n_eval, radius=3.2, width=resolution, height=resolution
    )
    # stagger the orbit so eval views interleave with training views
    order = np.arange(n_train + n_eval)
    eval_ids = set(order[:: (n_train + n_eval) // max(n_eval, 1)][:n_eval].tolist())
    background = (0.1, 0.1, 0.1)
    train_cams, eval_cams, images, eval_images, depths = [], [], [], [], []
    for i, cam in enumerate(cams):
        img, depth = render_mesh_image(bvh, cam, cube_texture, background)
        if i in eval_ids:
            eval_cams.append(cam)
            eval_images.append(img)
        else:
            train_cams.append(cam)
            images.append(img)
            depths.append(depth)
    return SyntheticDataset(
        mesh=mesh,
        cameras=train_cams,
        images=images,
        depths=depths,
        eval_cameras=eval_cams,
        eval_images=eval_images,
        background=background,
    )


# ---------------------------------------------------------------------------
# cabinet wall scene: a static shell with labeled articulated fronts
# ---------------------------------------------------------------------------


def box_mesh(center, size, label: int = -1, inward: bool = False) -> TriangleMesh:
    cx, cy, cz = center
    sx, sy, sz = (s / 2 for s in size)
    v = np.array(
        [
            [cx - sx, cy - sy, cz - sz],
            [cx + sx, cy - sy, cz - sz],
            [cx + sx, cy + sy, cz - sz],
            [cx - sx, cy + sy, cz - sz],
            [cx - sx, cy - sy, cz + sz],
            [cx + sx, cy - sy, cz + sz],
            [cx + sx, cy + sy, cz + sz],
            [cx - sx, cy + sy, cz + sz],
        ],
        float,
    )
    quads = [
        (0, 3, 2, 1),
        (4, 5, 6, 7),
        (0, 1, 5, 4),
        (2, 3, 7, 6),
        (1, 2, 6, 5),
        (3, 0, 4, 7),
    ]
    faces = []
    for a, b, c, d in quads:
        if inward:
            faces += [[a, c, b], [a, d, c]]
        else:
            faces += [[a, b, c], [a, c, d]]
    labels = np.full(len(faces), label, np.int32)
    return TriangleMesh(v, np.array(faces, np.int32), labels)


@dataclass
class CabinetScene:
    """Ground truth for the articulation pipeline fixtures."""

    mesh: TriangleMesh  # merged scene mesh with per-face labels
    cameras: list[Camera]
    object_labels: dict[int, dict]  # label -> {type, axis_point, axis_dir, kind}
    shell_label: int = 0


def cabinet_wall_scene(
    n_cameras: int = 6,
    resolution: int = 96,
    include_rigid: bool = True,
) -> CabinetScene:
    """A counter with two drawer fronts and one cabinet door, facing -y.

    Labels: 0 = shell, 1 = left drawer, 2 = right drawer, 3 = door,
    4 = rigid kettle (optional). Fronts sit proud of the shell so masks and
    panel fits are unambiguous.
    """
    parts: list[TriangleMesh] = []
    shell = box_mesh((0.0, 0.25, 0.45), (1.8, 0.5, 0.9), label=0)
    parts.append(shell)
    t = 0.04
    front_y = -0.02  # proud of the shell front plane y=0
    # two stacked drawer fronts on the left (wide, short panels)
    drawer_specs = [
        (1, (-0.45, front_y, 0.70), (0.82, t, 0.26)),
        (2, (-0.45, front_y, 0.38), (0.82, t, 0.26)),
    ]
    for label, center, size in drawer_specs:
        parts.append(box_mesh(center, size, label=label))
    # one tall cabinet door on the right, hinge on its left edge
    door_center = (0.45, front_y, 0.50)
    door_size = (0.80, t, 0.72)
    parts.append(box_mesh(door_center, door_size, label=3))
    # door handle knob near the right edge (drives hinge-side reasoning)
    parts.append(box_mesh((0.78, front_y - 0.035, 0.50), (0.05, 0.05, 0.05), label=3))
    object_labels = {
        1: {
            "kind": "articulated",
            "type": "prismatic",
            "axis_point": [-0.45, front_y, 0.70],
            "axis_dir": [0.0, -1.0, 0.0],
            "diagonal": float(np.linalg.norm([0.82, 0.26])),
        },
        2: {
            "kind": "articulated",
            "type": "prismatic",
            "axis_point": [-0.45, front_y, 0.38],
            "axis_dir": [0.0, -1.0, 0.0],
            "diagonal": float(np.linalg.norm([0.82, 0.26])),
        },
        3: {
            "kind": "articulated",
            "type": "revolute",
            "axis_point": [0.45 - 0.40, front_y, 0.50],  # left edge of the door
            "axis_dir": [0.0, 0.0, 1.0],
            "diagonal": float(np.linalg.norm([0.80, 0.72])),
        },
    }
    if include_rigid:
        parts.append(box_mesh((0.0, -0.35, 0.06), (0.12, 0.12, 0.12), label=4))
        object_labels[4] = {"kind": "rigid", "type": None}
    mesh = merge_meshes(parts)
    cams = []
    for i in range(n_cameras):
        x = -0.9 + 1.8 * i / max(n_cameras - 1, 1)
        eye = np.array([x * 0.7, -1.6, 0.55 + 0.25 * np.sin(i)])
        cams.append(
            look_at(eye, (0.0, 0.0, 0.5), up=(0, 0, 1), fov_deg=55,
                    width=resolution, height=resolution)
        )
    return CabinetScene(mesh=mesh, cameras=cams, object_labels=object_labels)


def label_masks(scene: CabinetScene, bvh: MeshBVH | None = None) -> dict[tuple[int, int], np.ndarray]:
    """Per-(camera, label) ground-truth masks from the labeled mesh."""
    bvh = bvh or MeshBVH(scene.mesh)
    labels = scene.mesh.face_labels
    out: dict[tuple[int, int], np.ndarray] = {}
    for ci, cam in enumerate(scene.cameras):
        dm = bvh.rasterize_depth(cam)
        hit = dm.face_id >= 0
        lab_img = np.full(dm.face_id.shape, -1, np.int32)
        lab_img[hit] = labels[dm.face_id[hit]]
        for label in np.unique(labels):
            if label <= 0:
                continue
            mask = lab_img == label
            if mask.any():
                out[(ci, int(label))] = mask
    return out
