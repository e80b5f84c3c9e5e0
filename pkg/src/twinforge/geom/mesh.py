"""Triangle-mesh substrate: validation, face frames, OBJ/PLY ingestion."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_FACE_AREA = 1e-12  # m^2; faces below this are degenerate


class MeshError(ValueError):
    """Raised for invalid mesh topology or geometry."""


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (N, 3) float64, meters
    faces: np.ndarray  # (M, 3) int32 vertex indices
    face_labels: np.ndarray | None = None  # (M,) int32 object label, -1 = unlabeled

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (N, 3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshError(f"faces must be (M, 3), got {self.faces.shape}")
        if self.face_labels is not None:
            self.face_labels = np.ascontiguousarray(self.face_labels, dtype=np.int32)
            if self.face_labels.shape != (len(self.faces),):
                raise MeshError("face_labels must be one label per face")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangle_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_areas(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def face_normals(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.maximum(norm, 1e-300)

    def face_centroids(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        return (a + b + c) / 3.0

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def extent(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def validate(self) -> None:
        """Check the mesh invariants; raise MeshError naming the first offender."""
        if self.n_faces == 0:
            return
        if self.faces.min() < 0 or self.faces.max() >= self.n_vertices:
            bad = np.where((self.faces < 0) | (self.faces >= self.n_vertices))[0][0]
            raise MeshError(f"face {bad} references out-of-range vertex index")
        areas = self.face_areas()
        small = np.where(areas <= MIN_FACE_AREA)[0]
        if small.size:
            raise MeshError(f"degenerate face {small[0]} (area {areas[small[0]]:.3e} m^2)")
        # Each directed edge may appear at most once; an undirected edge shared by
        # two faces must be traversed in opposite directions where manifold.
        edges = directed_edges(self.faces)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        if counts.max(initial=0) > 1:
            e = uniq[np.argmax(counts)]
            raise MeshError(f"inconsistent orientation: directed edge {tuple(e)} repeated")
        und = np.sort(uniq, axis=1)
        _, und_counts = np.unique(und, axis=0, return_counts=True)
        if und_counts.max(initial=0) > 2:
            raise MeshError("non-manifold edge shared by more than two faces")

    def submesh(self, face_ids: np.ndarray) -> tuple["TriangleMesh", np.ndarray]:
        """Extract faces, compacting vertices. Returns (mesh, old vertex index per new vertex)."""
        face_ids = np.asarray(face_ids, dtype=np.int64)
        faces = self.faces[face_ids]
        used, inverse = np.unique(faces, return_inverse=True)
        new_faces = inverse.reshape(faces.shape).astype(np.int32)
        labels = self.face_labels[face_ids] if self.face_labels is not None else None
        return TriangleMesh(self.vertices[used], new_faces, labels), used


def directed_edges(faces: np.ndarray) -> np.ndarray:
    return np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0)


def merge_meshes(meshes: list[TriangleMesh]) -> TriangleMesh:
    verts, faces, labels = [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        labels.append(
            m.face_labels if m.face_labels is not None else np.full(m.n_faces, -1, np.int32)
        )
        offset += m.n_vertices
    return TriangleMesh(
        np.concatenate(verts), np.concatenate(faces), np.concatenate(labels)
    )


@dataclass
class FaceFrame:
    face_id: int
    centroid: np.ndarray
    normal: np.ndarray
    t_u: np.ndarray
    t_v: np.ndarray
    inradius: float


@dataclass
class FaceFrames:
    """Per-face orthonormal frames, stored as arrays (one row per face)."""

    centroid: np.ndarray  # (M, 3)
    normal: np.ndarray  # (M, 3)
    t_u: np.ndarray  # (M, 3)
    t_v: np.ndarray  # (M, 3)
    inradius: np.ndarray  # (M,)
    corners: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.inradius)

    def __getitem__(self, i: int) -> FaceFrame:
        return FaceFrame(
            i, self.centroid[i], self.normal[i], self.t_u[i], self.t_v[i], float(self.inradius[i])
        )


def build_face_frames(mesh: TriangleMesh) -> FaceFrames:
    """One deterministic orthonormal frame per face.

    t_u follows the longest edge projected into the face plane (ties broken by
    lowest source vertex index via edge order), t_v = n x t_u, and the inradius
    is 2*area/perimeter.
    """
    a, b, c = mesh.triangle_corners()
    cross = np.cross(b - a, c - a)
    areas2 = np.linalg.norm(cross, axis=1)  # 2 * area
    bad = np.where(areas2 <= 2 * MIN_FACE_AREA)[0]
    if bad.size:
        raise MeshError(f"degenerate face {bad[0]}: cannot build a frame")
    normal = cross / areas2[:, None]

    edges = np.stack([b - a, c - b, a - c], axis=1)  # (M, 3, 3)
    lengths = np.linalg.norm(edges, axis=2)
    # argmax picks the first maximal edge; edge order (ab, bc, ca) fixes ties by
    # lowest source vertex position in the face tuple.
    longest = np.argmax(lengths, axis=1)
    e = edges[np.arange(len(edges)), longest]
    # project into the face plane (exact for planar triangles; guards drift)
    e = e - np.sum(e * normal, axis=1, keepdims=True) * normal
    t_u = e / np.linalg.norm(e, axis=1, keepdims=True)
    t_v = np.cross(normal, t_u)

    perimeter = lengths.sum(axis=1)
    inradius = areas2 / perimeter  # 2*area / perimeter
    centroid = (a + b + c) / 3.0
    return FaceFrames(centroid, normal, t_u, t_v, inradius, (a, b, c))


# ---------------------------------------------------------------------------
# Mesh ingestion: OBJ and binary little-endian PLY.
# ---------------------------------------------------------------------------


def load_mesh(path: str | Path) -> TriangleMesh:
    path = Path(path)
    if path.suffix.lower() == ".obj":
        return load_obj(path)
    if path.suffix.lower() == ".ply":
        return load_ply(path)
    raise MeshError(f"unsupported mesh format: {path.suffix}")


def load_obj(path: str | Path) -> TriangleMesh:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not faces:
        raise MeshError(f"OBJ {path} has no geometry")
    return TriangleMesh(np.array(verts, np.float64), np.array(faces, np.int32))


def save_obj(mesh: TriangleMesh, path: str | Path) -> None:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def load_ply(path: str | Path) -> TriangleMesh:
    data = Path(path).read_bytes()
    end = data.find(b"end_header\n")
    if end < 0:
        raise MeshError(f"PLY {path}: missing end_header")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]
    if not any(line.strip() == "format binary_little_endian 1.0" for line in header):
        raise MeshError(f"PLY {path}: only binary little-endian supported")
    counts: dict[str, int] = {}
    order: list[str] = []
    props: dict[str, list[str]] = {}
    current = None
    for line in header:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "element":
            current = parts[1]
            counts[current] = int(parts[2])
            order.append(current)
            props[current] = []
        elif parts[0] == "property" and current is not None:
            props[current].append(" ".join(parts[1:]))
    if props.get("vertex", [])[:3] != ["float x", "float y", "float z"] and props.get(
        "vertex", []
    )[:3] != ["float32 x", "float32 y", "float32 z"]:
        raise MeshError(f"PLY {path}: vertex must start with float x/y/z")
    off = 0
    verts = faces = None
    for elem in order:
        n = counts[elem]
        if elem == "vertex":
            stride = 4 * len(props[elem])
            raw = np.frombuffer(body, dtype="<f4", count=n * len(props[elem]), offset=off)
            verts = raw.reshape(n, -1)[:, :3].astype(np.float64)
            off += n * stride
        elif elem == "face":
            tris = np.empty((n, 3), np.int32)
            for i in range(n):
                (k,) = struct.unpack_from("<B", body, off)
                off += 1
                idx = struct.unpack_from(f"<{k}i", body, off)
                off += 4 * k
                if k != 3:
                    raise MeshError(f"PLY {path}: face {i} has {k} vertices, want 3")
                tris[i] = idx
            faces = tris
        else:  # skip unknown fixed-stride elements
            off += n * 4 * len(props[elem])
    if verts is None or faces is None:
        raise MeshError(f"PLY {path}: missing vertex or face element")
    return TriangleMesh(verts, faces)


def save_ply(mesh: TriangleMesh, path: str | Path) -> None:
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property float x\nproperty float y\nproperty float z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    ).encode("ascii")
    out = bytearray(header)
    out += mesh.vertices.astype("<f4").tobytes()
    for a, b, c in mesh.faces:
        out += struct.pack("<Biii", 3, a, b, c)
    Path(path).write_bytes(bytes(out))
