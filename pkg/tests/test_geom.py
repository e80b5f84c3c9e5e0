import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinforge.geom import (
    Camera,
    MeshBVH,
    MeshError,
    TriangleMesh,
    build_face_frames,
    load_obj,
    load_ply,
    look_at,
    save_obj,
    save_ply,
)

from conftest import make_box, make_quad, random_triangle_soup


# ---------------------------------------------------------------------------
# face frames
# ---------------------------------------------------------------------------


def test_face_frame_unit_right_triangle():
    mesh = TriangleMesh(
        np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), np.array([[0, 1, 2]], np.int32)
    )
    frames = build_face_frames(mesh)
    np.testing.assert_allclose(frames.centroid[0], [1 / 3, 1 / 3, 0], atol=1e-12)
    np.testing.assert_allclose(frames.normal[0], [0, 0, 1], atol=1e-12)


def test_face_frame_equilateral_inradius():
    h = np.sqrt(3) / 2
    mesh = TriangleMesh(
        np.array([[0, 0, 0], [1, 0, 0], [0.5, h, 0]], float), np.array([[0, 1, 2]], np.int32)
    )
    frames = build_face_frames(mesh)
    # oracle: 2*area/perimeter computed by hand for side 1
    area = 0.5 * 1 * h
    expected = 2 * area / 3.0
    assert abs(expected - 0.28867513459481287) < 1e-12
    np.testing.assert_allclose(frames.inradius[0], expected, rtol=1e-12)


def test_face_frame_degenerate_rejected():
    mesh = TriangleMesh(
        np.array([[0, 0, 0], [0, 0, 0], [0, 1, 0]], float), np.array([[0, 1, 2]], np.int32)
    )
    with pytest.raises(MeshError, match="face 0"):
        build_face_frames(mesh)


def test_face_frames_orthonormal_and_inradius_bound(rng):
    mesh = random_triangle_soup(rng, 200)
    frames = build_face_frames(mesh)
    dot = lambda a, b: np.abs(np.sum(a * b, axis=1)).max()
    assert dot(frames.t_u, frames.t_v) < 1e-9
    assert dot(frames.t_u, frames.normal) < 1e-9
    assert dot(frames.t_v, frames.normal) < 1e-9
    for arr in (frames.t_u, frames.t_v, frames.normal):
        np.testing.assert_allclose(np.linalg.norm(arr, axis=1), 1.0, atol=1e-9)
    # inradius <= circumradius
    a, b, c = mesh.triangle_corners()
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(c - a, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area = mesh.face_areas()
    circum = la * lb * lc / (4 * area)
    assert np.all(frames.inradius <= circum + 1e-12)


def test_face_frame_tangent_deterministic():
    mesh = make_quad()
    f1 = build_face_frames(mesh)
    f2 = build_face_frames(mesh)
    np.testing.assert_array_equal(f1.t_u, f2.t_u)


# ---------------------------------------------------------------------------
# raycast
# ---------------------------------------------------------------------------


def test_raycast_axis_aligned_hit():
    mesh = TriangleMesh(
        np.array([[-1, -1, 0], [1, -1, 0], [0, 1, 0]], float), np.array([[0, 1, 2]], np.int32)
    )
    bvh = MeshBVH(mesh)
    hit = bvh.raycast(np.array([0, 0, -1.0]), np.array([0, 0, 1.0]), cull_backfaces=False)
    assert hit is not None
    assert hit.face_id == 0
    assert abs(hit.depth - 1.0) < 1e-12
    np.testing.assert_allclose(hit.point(mesh), [0, 0, 0], atol=1e-12)


def test_raycast_parallel_miss():
    mesh = make_quad()
    bvh = MeshBVH(mesh)
    assert bvh.raycast(np.array([0, 0, 1.0]), np.array([1, 0, 0.0])) is None


def _brute_force_raycast(mesh, origin, direction, cull):
    """Exhaustive Moller-Trumbore over every triangle."""
    best = None
    for fid, (i0, i1, i2) in enumerate(mesh.faces):
        a, b, c = mesh.vertices[i0], mesh.vertices[i1], mesh.vertices[i2]
        e1, e2 = b - a, c - a
        pvec = np.cross(direction, e2)
        det = e1 @ pvec
        if cull:
            if det < 1e-12:
                continue
        elif abs(det) < 1e-12:
            continue
        inv = 1.0 / det
        tvec = origin - a
        u = (tvec @ pvec) * inv
        if u < -1e-12 or u > 1 + 1e-12:
            continue
        qvec = np.cross(tvec, e1)
        v = (direction @ qvec) * inv
        if v < -1e-12 or u + v > 1 + 1e-12:
            continue
        t = (e2 @ qvec) * inv
        if t < 1e-9:
            continue
        if best is None or t < best[1]:
            best = (fid, t)
    return best


def test_raycast_matches_brute_force(rng):
    mesh = random_triangle_soup(rng, 100)
    bvh = MeshBVH(mesh)
    for _ in range(200):
        origin = rng.uniform(-2, 2, 3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        for cull in (True, False):
            expect = _brute_force_raycast(mesh, origin, direction, cull)
            hit = bvh.raycast(origin, direction, cull_backfaces=cull)
            if expect is None:
                assert hit is None
            else:
                assert hit is not None
                assert hit.face_id == expect[0]
                assert abs(hit.depth - expect[1]) < 1e-10


def test_raycast_bary_reconstructs_hit_point(rng):
    mesh = random_triangle_soup(rng, 50)
    bvh = MeshBVH(mesh)
    found = 0
    for _ in range(100):
        origin = rng.uniform(-2, 2, 3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        hit = bvh.raycast(origin, direction, cull_backfaces=False)
        if hit is None:
            continue
        found += 1
        np.testing.assert_allclose(
            hit.point(mesh), origin + hit.depth * direction, atol=1e-9
        )
    assert found > 10


# ---------------------------------------------------------------------------
# signed distance
# ---------------------------------------------------------------------------


def test_signed_distance_cube_center(unit_box):
    bvh = MeshBVH(unit_box)
    d = bvh.signed_distance(np.array([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(d, [-0.5], atol=1e-12)


def test_signed_distance_above_face(unit_box):
    bvh = MeshBVH(unit_box)
    d = bvh.signed_distance(np.array([[0.0, 0.0, 0.8]]))
    np.testing.assert_allclose(d, [0.3], atol=1e-12)


def _brute_force_unsigned(mesh, p):
    best = np.inf
    for i0, i1, i2 in mesh.faces:
        a, b, c = mesh.vertices[i0], mesh.vertices[i1], mesh.vertices[i2]
        best = min(best, _point_tri_dist(p, a, b, c))
    return best


def _point_tri_dist(p, a, b, c):
    # quadratic-region closest point (independent formulation from the kernel)
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return np.linalg.norm(p - a)
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return np.linalg.norm(p - b)
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3)
        return np.linalg.norm(p - (a + t * ab))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return np.linalg.norm(p - c)
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6)
        return np.linalg.norm(p - (a + t * ac))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return np.linalg.norm(p - (b + t * (c - b)))
    denom = va + vb + vc
    v, w = vb / denom, vc / denom
    return np.linalg.norm(p - (a + v * ab + w * ac))


def test_unsigned_distance_matches_brute_force(rng):
    mesh = random_triangle_soup(rng, 80)
    bvh = MeshBVH(mesh)
    pts = rng.uniform(-2, 2, size=(50, 3))
    dist, _, _ = bvh.closest_points(pts)
    expect = np.array([_brute_force_unsigned(mesh, p) for p in pts])
    np.testing.assert_allclose(dist, expect, atol=1e-9)


def test_sign_flips_once_crossing_watertight_surface(unit_box, rng):
    bvh = MeshBVH(unit_box)
    for _ in range(20):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        ts = np.linspace(-2, 2, 101)
        pts = np.outer(ts, d)  # line through the interior
        s = np.sign(bvh.signed_distance(pts))
        flips = np.count_nonzero(np.diff(s))
        assert flips == 2  # enters and leaves the box exactly once each


def test_signed_distance_confidence_flag_on_open_mesh():
    quad = make_quad()  # a single open rectangle is nowhere watertight
    bvh = MeshBVH(quad)
    _, confident = bvh.signed_distance(np.array([[0.5, 0.5, 0.2]]), return_confidence=True)
    assert not confident[0]


# ---------------------------------------------------------------------------
# depth rasterization
# ---------------------------------------------------------------------------


def _fronto_camera(width=32, height=32, z=0.0):
    cam = look_at(
        eye=(0.5, 0.5, z), target=(0.5, 0.5, z + 1.0), up=(0, 1, 0), width=width, height=height
    )
    return cam


def test_depth_constant_plane():
    quad = make_quad(origin=(-10, -10, 2.0), edge_u=(20, 0, 0), edge_v=(0, 20, 0))
    cam = look_at(eye=(0, 0, 0), target=(0, 0, 1), up=(0, 1, 0), width=16, height=16)
    dm = MeshBVH(quad).rasterize_depth(cam)
    np.testing.assert_allclose(dm.depth, 2.0, atol=1e-9)


def test_depth_matches_per_pixel_raycast(rng):
    mesh = random_triangle_soup(rng, 60)
    bvh = MeshBVH(mesh)
    cam = look_at(eye=(0, 0, -3), target=(0, 0, 0), up=(0, 1, 0), width=24, height=24)
    dm = bvh.rasterize_depth(cam)
    origin, dirs = cam.pixel_rays()
    forward = cam.rotation[:, 2]
    for iy in range(0, 24, 5):
        for ix in range(0, 24, 5):
            expect = _brute_force_raycast(mesh, origin, dirs[iy, ix], cull=False)
            if expect is None:
                assert np.isinf(dm.depth[iy, ix])
            else:
                z = expect[1] * (dirs[iy, ix] @ forward)
                assert abs(dm.depth[iy, ix] - z) < 1e-6


def test_depth_inside_closed_box_all_finite():
    room = make_box(size=(2, 2, 2), inward=True)
    cam = look_at(eye=(0, 0, 0), target=(1, 0.2, 0.1), width=16, height=16)
    dm = MeshBVH(room).rasterize_depth(cam)
    assert np.all(np.isfinite(dm.depth))
    # outward-wound box must behave identically (orientation-free reference)
    box = make_box(size=(2, 2, 2), inward=False)
    dm2 = MeshBVH(box).rasterize_depth(cam)
    assert np.all(np.isfinite(dm2.depth))


# ---------------------------------------------------------------------------
# mesh io and validation
# ---------------------------------------------------------------------------


def test_mesh_validate_rejects_bad_index():
    with pytest.raises(MeshError, match="out-of-range"):
        TriangleMesh(np.zeros((2, 3)), np.array([[0, 1, 2]], np.int32)).validate()


def test_mesh_validate_rejects_flipped_winding(unit_box):
    faces = unit_box.faces.copy()
    faces[0] = faces[0][::-1]  # flip one face
    with pytest.raises(MeshError, match="orientation"):
        TriangleMesh(unit_box.vertices, faces).validate()


def test_obj_roundtrip(tmp_path, unit_box):
    path = tmp_path / "box.obj"
    save_obj(unit_box, path)
    again = load_obj(path)
    np.testing.assert_allclose(again.vertices, unit_box.vertices, atol=1e-6)
    np.testing.assert_array_equal(again.faces, unit_box.faces)


def test_ply_roundtrip(tmp_path, unit_box):
    path = tmp_path / "box.ply"
    save_ply(unit_box, path)
    again = load_ply(path)
    np.testing.assert_allclose(again.vertices, unit_box.vertices, atol=1e-6)
    np.testing.assert_array_equal(again.faces, unit_box.faces)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
def test_box_inradius_scaling(w, h, d):
    mesh = make_box(size=(w, h, d))
    frames = build_face_frames(mesh)
    assert np.all(frames.inradius > 0)
    assert np.all(frames.inradius <= max(w, h, d))


def test_camera_rejects_non_orthonormal():
    pose = np.eye(4)
    pose[0, 0] = 2.0
    with pytest.raises(Exception):
        Camera(100, 100, 8, 8, 16, 16, pose)
