import numpy as np
import pytest

from twinforge.geom import TriangleMesh


def make_box(center=(0, 0, 0), size=(1, 1, 1), inward=False) -> TriangleMesh:
    """Axis-aligned closed box; outward winding unless inward (a room shell)."""
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
        dtype=np.float64,
    )
    quads = [
        (0, 3, 2, 1),  # bottom (normal -z)
        (4, 5, 6, 7),  # top (+z)
        (0, 1, 5, 4),  # front (-y)
        (2, 3, 7, 6),  # back (+y)
        (1, 2, 6, 5),  # right (+x)
        (3, 0, 4, 7),  # left (-x)
    ]
    faces = []
    for a, b, c, d in quads:
        if inward:
            faces += [[a, c, b], [a, d, c]]
        else:
            faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(v, np.array(faces, np.int32))


def make_quad(
    origin=(0.0, 0.0, 0.0), edge_u=(1.0, 0.0, 0.0), edge_v=(0.0, 1.0, 0.0)
) -> TriangleMesh:
    """Two-triangle rectangle spanned by edge_u and edge_v from origin."""
    o = np.asarray(origin, np.float64)
    u = np.asarray(edge_u, np.float64)
    v = np.asarray(edge_v, np.float64)
    verts = np.array([o, o + u, o + u + v, o + v])
    faces = np.array([[0, 1, 2], [0, 2, 3]], np.int32)
    return TriangleMesh(verts, faces)


def random_triangle_soup(rng: np.random.Generator, n_faces: int, extent=1.0) -> TriangleMesh:
    verts = rng.uniform(-extent, extent, size=(n_faces * 3, 3))
    # nudge collapsed triangles apart so every face has usable area
    faces = np.arange(n_faces * 3, dtype=np.int32).reshape(n_faces, 3)
    mesh = TriangleMesh(verts, faces)
    areas = mesh.face_areas()
    verts[faces[areas < 1e-6, 1]] += 0.1
    return TriangleMesh(verts, faces)


@pytest.fixture
def unit_box() -> TriangleMesh:
    return make_box()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
