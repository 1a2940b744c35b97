import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reparam import csg


# --- primitives and models ---------------------------------------------------

def test_primitive_rejects_bad_scale():
    with pytest.raises(csg.ModelError):
        csg.Primitive(kind=csg.CUBE, name="p", translation=(0, 0, 0),
                      scale=(1.0, 0.0, 1.0))
    with pytest.raises(csg.ModelError):
        csg.Primitive(kind=csg.CUBE, name="p", translation=(0, 0, 0),
                      scale=(1.0, -0.5, 1.0))


def test_top_radius_only_on_cone():
    with pytest.raises(csg.ModelError):
        csg.Primitive(kind=csg.CUBE, name="p", translation=(0, 0, 0),
                      scale=(1, 1, 1), top_radius=0.5)
    with pytest.raises(csg.ModelError):
        csg.Primitive(kind=csg.CONE_CYLINDER_Y, name="p", translation=(0, 0, 0),
                      scale=(1, 1, 1))  # cone requires a top radius
    with pytest.raises(csg.ModelError):
        csg.Primitive(kind=csg.CONE_CYLINDER_Y, name="p", translation=(0, 0, 0),
                      scale=(1, 1, 1), top_radius=1.5)


def test_param_counts():
    cube = csg.Primitive(kind=csg.CUBE, name="c", translation=(0, 0, 0), scale=(1, 1, 1))
    cone = csg.Primitive(kind=csg.CONE_CYLINDER_Y, name="k", translation=(0, 0, 0),
                         scale=(1, 1, 1), top_radius=0.5)
    assert cube.param_count == 6
    assert cone.param_count == 7


def test_model_rejects_duplicate_names():
    p = csg.Primitive(kind=csg.CUBE, name="p", translation=(0, 0, 0), scale=(1, 1, 1))
    q = csg.Primitive(kind=csg.CUBE, name="p", translation=(1, 0, 0), scale=(1, 1, 1))
    with pytest.raises(csg.ModelError):
        csg.Model(primitives=(p, q), category="x")


def test_model_rejects_empty():
    with pytest.raises(csg.ModelError):
        csg.Model(primitives=(), category="x")


def test_dimension_accounting(coned):
    # 6 for the plain cylinder + 7 for the cone-cylinder
    assert coned.d == 13
    names = coned.param_names()
    assert len(names) == 13
    assert names[0] == "body.tx"
    assert names[-1] == "neck.r_top"
    assert "neck.sx" in names


def test_param_slices(coned):
    slices = coned.param_slices()
    assert slices[0] == slice(0, 6)
    assert slices[1] == slice(6, 13)


def test_column_lookup(coned):
    assert coned.column(0, "tx") == 0
    assert coned.column(1, "sz") == 6 + 5
    assert coned.column(1, "r_top") == 12
    with pytest.raises(csg.ModelError):
        coned.column(0, "r_top")  # plain cylinder has no top radius


# --- flatten / unflatten -----------------------------------------------------

def test_flatten_round_trip(coned):
    x = csg.flatten(coned)
    assert x.shape == (13,)
    model2 = csg.unflatten(coned, x)
    assert model2 == coned


def test_unflatten_rejects_wrong_length(two_cubes):
    with pytest.raises(csg.ModelError):
        csg.unflatten(two_cubes, np.zeros(5))


def test_unflatten_rejects_bad_values(two_cubes):
    x = csg.flatten(two_cubes)
    x[3] = -1.0  # sx of the first cube
    with pytest.raises(csg.ModelError):
        csg.unflatten(two_cubes, x)
    assert not csg.params_valid(two_cubes, x)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.lists(st.floats(0.05, 4), min_size=3, max_size=3))
@settings(max_examples=25, deadline=None)
def test_flatten_inverts_unflatten(t, s):
    p = csg.Primitive(kind=csg.CUBE, name="p", translation=tuple(t), scale=tuple(s))
    m = csg.Model(primitives=(p,), category="x")
    x = csg.flatten(m)
    assert np.array_equal(csg.flatten(csg.unflatten(m, x)), x)


# --- bounding boxes ----------------------------------------------------------

def test_aabb_cube():
    p = csg.Primitive(kind=csg.CUBE, name="p", translation=(1.0, 2.0, -1.0),
                      scale=(2.0, 4.0, 6.0))
    m = csg.Model(primitives=(p,), category="x")
    lo, hi = csg.aabb(m, csg.flatten(m))
    assert np.allclose(lo, [0.0, 0.0, -4.0])
    assert np.allclose(hi, [2.0, 4.0, 2.0])
    assert csg.bbox_diagonal(m, csg.flatten(m)) == pytest.approx(np.sqrt(4 + 16 + 36))
    assert np.allclose(csg.bbox_center(m, csg.flatten(m)), [1.0, 2.0, -1.0])


def test_aabb_union(two_cubes):
    lo, hi = csg.aabb(two_cubes, csg.flatten(two_cubes))
    assert np.allclose(lo, [-1.1, 0.0, -0.5])
    assert np.allclose(hi, [1.1, 1.0, 0.5])


# --- membership --------------------------------------------------------------

def test_contains_cube():
    p = csg.Primitive(kind=csg.CUBE, name="p", translation=(0, 0, 0), scale=(2, 2, 2))
    m = csg.Model(primitives=(p,), category="x")
    x = csg.flatten(m)
    assert csg.contains(m, x, np.array([0.99, 0.99, 0.99]))
    assert not csg.contains(m, x, np.array([1.01, 0.0, 0.0]))


def test_contains_cylinder_axis_and_radius():
    p = csg.Primitive(kind=csg.CYLINDER_Y, name="p", translation=(0, 0, 0),
                      scale=(2, 2, 2))
    m = csg.Model(primitives=(p,), category="x")
    x = csg.flatten(m)
    # radius is 1 in world units (0.5 * scale); corners of the box are outside
    assert csg.contains(m, x, np.array([0.99, 0.0, 0.0]))
    assert not csg.contains(m, x, np.array([0.8, 0.0, 0.8]))
    assert csg.contains(m, x, np.array([0.7, 0.99, 0.0]))
    assert not csg.contains(m, x, np.array([0.0, 1.01, 0.0]))


def test_contains_cone_tapers():
    p = csg.Primitive(kind=csg.CONE_CYLINDER_Y, name="p", translation=(0, 0, 0),
                      scale=(2, 2, 2), top_radius=0.5)
    m = csg.Model(primitives=(p,), category="x")
    x = csg.flatten(m)
    # bottom radius 1.0, top radius 0.5 in world units
    assert csg.contains(m, x, np.array([0.95, -0.99, 0.0]))
    assert not csg.contains(m, x, np.array([0.95, 0.99, 0.0]))
    assert csg.contains(m, x, np.array([0.45, 0.99, 0.0]))
    # halfway up: radius 0.75
    assert csg.contains(m, x, np.array([0.74, 0.0, 0.0]))
    assert not csg.contains(m, x, np.array([0.76, 0.0, 0.0]))


def test_contains_batch_and_visible(two_cubes):
    x = csg.flatten(two_cubes)
    pts = np.array([[-0.6, 0.5, 0.0], [0.6, 0.5, 0.0], [0.0, 0.5, 0.0]])
    got = csg.contains(two_cubes, x, pts)
    assert got.tolist() == [True, True, False]
    only_b = csg.contains(two_cubes, x, pts, visible=[False, True])
    assert only_b.tolist() == [False, True, False]


def test_contains_skips_degenerate_scale(two_cubes):
    x = csg.flatten(two_cubes)
    x[3] = 0.0  # collapse cube a
    pts = np.array([[-0.6, 0.5, 0.0], [0.6, 0.5, 0.0]])
    assert csg.contains(two_cubes, x, pts).tolist() == [False, True]


# --- tessellation ------------------------------------------------------------

def _signed_volume(mesh: csg.TriangleMesh) -> float:
    v = mesh.vertices
    a, b, c = v[mesh.faces[:, 0]], v[mesh.faces[:, 1]], v[mesh.faces[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def test_tessellate_cube_counts():
    p = csg.Primitive(kind=csg.CUBE, name="p", translation=(0, 0, 0), scale=(1, 1, 1))
    m = csg.Model(primitives=(p,), category="x")
    mesh = csg.tessellate(m, csg.flatten(m))
    assert mesh.vertices.shape == (8, 3)
    assert mesh.faces.shape == (12, 3)
    assert _signed_volume(mesh) == pytest.approx(1.0)  # outward orientation


def test_tessellate_cylinder_volume():
    p = csg.Primitive(kind=csg.CYLINDER_Z, name="p", translation=(0, 0, 0),
                      scale=(2, 2, 2))
    m = csg.Model(primitives=(p,), category="x")
    mesh = csg.tessellate(m, csg.flatten(m), segments=256)
    # r=1, h=2 -> pi*2; polygonal approximation from inscribed vertices
    assert _signed_volume(mesh) == pytest.approx(2 * np.pi, rel=1e-3)


def test_tessellate_cone_volume():
    p = csg.Primitive(kind=csg.CONE_CYLINDER_Y, name="p", translation=(0, 0, 0),
                      scale=(2, 3, 2), top_radius=0.5)
    m = csg.Model(primitives=(p,), category="x")
    mesh = csg.tessellate(m, csg.flatten(m), segments=256)
    # truncated cone: h=3, R=1, r=0.5 -> pi*h*(R^2+Rr+r^2)/3
    want = np.pi * 3 * (1 + 0.5 + 0.25) / 3
    assert _signed_volume(mesh) == pytest.approx(want, rel=1e-3)


def test_tessellate_ranges_partition(mixed):
    mesh = csg.tessellate(mixed, csg.flatten(mixed))
    assert [r.name for r in mesh.ranges] == ["base", "post"]
    vtotal = sum(r.vertex_count for r in mesh.ranges)
    ftotal = sum(r.face_count for r in mesh.ranges)
    assert vtotal == len(mesh.vertices)
    assert ftotal == len(mesh.faces)
    for r in mesh.ranges:
        block = mesh.faces[r.face_start:r.face_start + r.face_count]
        assert block.min() >= r.vertex_start
        assert block.max() < r.vertex_start + r.vertex_count


def test_tessellate_visibility(mixed):
    x = csg.flatten(mixed)
    mesh = csg.tessellate(mixed, x, visible=[True, False])
    assert [r.name for r in mesh.ranges] == ["base"]
    assert len(mesh.faces) == 12


def test_tessellate_rejects_tiny_segment_count(mixed):
    with pytest.raises(csg.ModelError):
        csg.tessellate(mixed, csg.flatten(mixed), segments=4)


def test_tessellate_matches_aabb(mixed):
    x = csg.flatten(mixed)
    mesh = csg.tessellate(mixed, x, segments=64)
    lo, hi = csg.aabb(mixed, x)
    mlo, mhi = mesh.aabb()
    assert np.all(mlo >= lo - 1e-12) and np.all(mhi <= hi + 1e-12)
    # cube corners touch the box exactly
    assert mlo[1] == pytest.approx(lo[1])


def test_export_obj(two_cubes):
    mesh = csg.tessellate(two_cubes, csg.flatten(two_cubes))
    text = csg.export_obj(mesh)
    lines = text.splitlines()
    assert lines.count("o a") == 1 and lines.count("o b") == 1
    vs = [l for l in lines if l.startswith("v ")]
    fs = [l for l in lines if l.startswith("f ")]
    assert len(vs) == 16 and len(fs) == 24
    idx = [int(tok) for l in fs for tok in l.split()[1:]]
    assert min(idx) == 1 and max(idx) == 16  # OBJ indices are 1-based


# --- face map ----------------------------------------------------------------

def test_face_map_rows_cube():
    p = csg.Primitive(kind=csg.CUBE, name="p", translation=(1.0, 2.0, 3.0),
                      scale=(2.0, 4.0, 6.0))
    m = csg.Model(primitives=(p,), category="x")
    x = csg.flatten(m)
    fm = csg.face_map(m, x)
    assert fm.Q.shape == (6, 6)
    pos = fm.Q @ x
    # row order: (-x, +x, -y, +y, -z, +z)
    assert np.allclose(pos, [0.0, 2.0, 0.0, 4.0, 0.0, 6.0])
    # each row touches exactly its translation and scale slot
    assert np.count_nonzero(fm.Q[0]) == 2
    assert fm.Q[1, 0] == 1.0 and fm.Q[1, 3] == 0.5
    assert fm.Q[0, 0] == 1.0 and fm.Q[0, 3] == -0.5


def test_face_map_weights_are_face_areas():
    p = csg.Primitive(kind=csg.CUBE, name="p", translation=(0, 0, 0),
                      scale=(2.0, 4.0, 6.0))
    m = csg.Model(primitives=(p,), category="x")
    fm = csg.face_map(m, csg.flatten(m))
    # area opposite each axis: x-faces 4*6, y-faces 2*6, z-faces 2*4
    assert np.allclose(fm.weights, [24, 24, 12, 12, 8, 8])


def test_face_map_cylinder_weight_factor():
    c = csg.Primitive(kind=csg.CUBE, name="c", translation=(0, 0, 0), scale=(2, 2, 2))
    k = csg.Primitive(kind=csg.CYLINDER_Y, name="k", translation=(3, 0, 0), scale=(2, 2, 2))
    m = csg.Model(primitives=(c, k), category="x")
    fm = csg.face_map(m, csg.flatten(m))
    assert not fm.alg1_unsound
    # all six faces of a cylinder-kind primitive are scaled by pi/4
    assert np.allclose(fm.weights[6:], fm.weights[:6] * np.pi / 4)


def test_face_map_flags_cone(coned):
    fm = csg.face_map(coned, csg.flatten(coned))
    assert fm.alg1_unsound
    assert fm.Q.shape == (12, 13)
    assert np.allclose(fm.Q[:, 12], 0.0)  # top radius never enters the face map


def test_face_map_weights_frozen_at_reference(two_cubes):
    x0 = csg.flatten(two_cubes)
    fm0 = csg.face_map(two_cubes, x0)
    fm1 = csg.face_map(two_cubes, x0 * 2.0)
    assert np.allclose(fm1.weights, fm0.weights * 4.0)
    assert np.allclose(fm1.Q, fm0.Q)  # rows are value-independent


# --- keypoints ---------------------------------------------------------------

def test_keypoints_count_and_positions(two_cubes):
    kps = csg.keypoints(two_cubes)
    assert len(kps) == 18  # 9 per primitive
    x = csg.flatten(two_cubes)
    centers = [k for k in kps if k.point_id == "center"]
    assert np.allclose(centers[0].position(x), [-0.6, 0.5, 0.0])
    corner = next(k for k in kps if k.primitive_index == 1 and k.point_id == "corner_ppm")
    assert np.allclose(corner.position(x), [0.6 + 0.5, 1.0, -0.5])


def test_keypoint_rows_are_linear(two_cubes):
    x = csg.flatten(two_cubes)
    for kp in csg.keypoints(two_cubes):
        assert kp.rows.shape == (3, two_cubes.d)
        assert np.allclose(kp.rows @ x, kp.position(x))
