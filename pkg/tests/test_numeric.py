import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reparam import constraints, csg, numeric, raster
from tests.conftest import make_mixed, make_two_cubes


# --- null space --------------------------------------------------------------

def random_constraints(rng, d, m):
    """Random low-rank-ish constraint matrix with some duplicated rows."""
    base = rng.standard_normal((max(m // 2, 1), d))
    rows = [base[rng.integers(len(base))] * rng.uniform(0.5, 2) for _ in range(m)]
    return np.array(rows) if rows else np.zeros((0, d))


def test_nullspace_annihilates(rng):
    for _ in range(30):
        d = int(rng.integers(2, 20))
        m = int(rng.integers(0, 15))
        C = random_constraints(rng, d, m)
        sub = numeric.nullspace(C)
        if m and sub.d_free:
            assert np.abs(C @ sub.N).max() < 1e-9
        rank = np.linalg.matrix_rank(C) if m else 0
        assert sub.N.shape == (d, d - rank)
        assert sub.d_free == d - rank


def test_nullspace_empty_matrix_is_identity():
    sub = numeric.nullspace(np.zeros((0, 7)))
    assert np.array_equal(sub.N, np.eye(7))
    assert sub.free_cols == tuple(range(7))


def test_nullspace_identity_retaining(rng):
    # the basis restricted to the free columns is the identity, so
    # reduce() reads reduced coordinates straight off the vector
    for _ in range(20):
        C = rng.standard_normal((3, 8))
        sub = numeric.nullspace(C)
        picked = sub.N[list(sub.free_cols), :]
        assert np.allclose(picked, np.eye(sub.d_free))
        y = rng.standard_normal(sub.d_free)
        x = sub.N @ y
        assert np.allclose(sub.reduce(x), y)


def test_nullspace_full_rank_square():
    C = np.eye(4)
    sub = numeric.nullspace(C)
    assert sub.N.shape == (4, 0)
    assert sub.d_free == 0


@given(arrays(np.float64, (4, 9), elements=st.floats(-10, 10)))
@settings(max_examples=40, deadline=None)
def test_nullspace_property(C):
    sub = numeric.nullspace(C)
    if sub.d_free and sub.rank:
        scale = max(np.abs(C).max(), 1.0)
        assert np.abs(C @ sub.N).max() < 1e-9 * scale
    assert sub.d_free + sub.rank == 9


def test_in_rowspan():
    C = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    assert numeric.in_rowspan(C, np.array([[2.0, 3.0, 0.0]]))
    assert not numeric.in_rowspan(C, np.array([[0.0, 0.0, 1.0]]))
    assert numeric.in_rowspan(np.zeros((0, 3)), np.zeros((0, 3)))


def test_full_space():
    sub = numeric.full_space(5)
    assert sub.C.shape == (0, 5)
    assert np.array_equal(sub.N, np.eye(5))


# --- weighted projection vs. a dense KKT oracle ------------------------------

def kkt_solve(fm, C, x0):
    """Equality-constrained weighted least squares via the stacked KKT system."""
    AQ = np.sqrt(fm.weights)[:, None] * fm.Q
    B = AQ.T @ AQ
    d, m = B.shape[0], C.shape[0]
    K = np.block([[2 * B, C.T], [C, np.zeros((m, m))]])
    rhs = np.concatenate([2 * B @ x0, np.zeros(m)])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    return sol[:d]


def test_alg1_matches_kkt(rng):
    model = make_two_cubes()
    x0 = csg.flatten(model)
    pool = constraints.enumerate_candidates(model, x0)
    fm = csg.face_map(model, x0)
    for trial in range(10):
        picks = rng.choice(len(pool), size=int(rng.integers(1, 5)), replace=False)
        C = constraints.rows_of([pool[i] for i in picks])
        sub = numeric.nullspace(C)
        x = x0 + rng.normal(0, 0.05, size=model.d)
        got = numeric.project_alg1(fm, sub, x)
        want = kkt_solve(fm, C, x)
        assert np.abs(got - want).max() < 1e-6


def test_alg1_satisfies_constraints_exactly(rng):
    model = make_mixed()
    x0 = csg.flatten(model)
    pool = constraints.enumerate_candidates(model, x0)
    fm = csg.face_map(model, x0)
    C = constraints.rows_of(list(pool)[:3])
    sub = numeric.nullspace(C)
    x = x0 + rng.normal(0, 0.03, size=model.d)
    xs = numeric.project_alg1(fm, sub, x)
    assert np.abs(C @ xs).max() < 1e-9


def test_alg1_idempotent(rng):
    model = make_two_cubes()
    x0 = csg.flatten(model)
    pool = constraints.enumerate_candidates(model, x0)
    fm = csg.face_map(model, x0)
    sub = numeric.nullspace(constraints.rows_of(list(pool)[:4]))
    x = x0 + rng.normal(0, 0.05, size=model.d)
    once = numeric.project_alg1(fm, sub, x)
    twice = numeric.project_alg1(fm, sub, once)
    assert np.allclose(once, twice, atol=1e-12)


def test_alg1_feasible_point_is_fixed(two_cubes):
    x0 = csg.flatten(two_cubes)
    pool = constraints.enumerate_candidates(two_cubes, x0)
    fm = csg.face_map(two_cubes, x0)
    sub = numeric.nullspace(constraints.rows_of(list(pool)))
    assert np.allclose(numeric.project_alg1(fm, sub, x0), x0, atol=1e-9)


def test_alg1_top_radius_passes_through(coned):
    x0 = csg.flatten(coned)
    fm = csg.face_map(coned, x0)
    # constrain the two radial scales to match across primitives
    row = np.zeros(coned.d)
    row[coned.column(0, "sx")] = 1.0
    row[coned.column(1, "sx")] = -1.0
    sub = numeric.nullspace(row[None, :])
    x = x0.copy()
    x[coned.column(1, "r_top")] = 0.37
    xs = numeric.project_alg1(fm, sub, x)
    assert xs[coned.column(1, "r_top")] == pytest.approx(0.37)


def test_alg1_rejects_collapsed_result(two_cubes):
    x0 = csg.flatten(two_cubes)
    fm = csg.face_map(two_cubes, x0)
    # force sy of cube a to zero: constrain it against a frozen direction
    row = np.zeros(two_cubes.d)
    row[two_cubes.column(0, "sy")] = 1.0
    sub = numeric.nullspace(row[None, :])
    with pytest.raises(numeric.ProjectionError):
        numeric.project_alg1(fm, sub, x0)


# --- descent-based routines --------------------------------------------------

def test_fit_identity_targets(mixed):
    x0 = csg.flatten(mixed)
    cams = [c.anchor(mixed, x0) for c in raster.sample_cameras(0, 2)]
    targets = raster.render_targets(mixed, x0, cams, size=48)
    res = numeric.fit_to_images(mixed, x0, targets, iters=3, lr=0.05, lam=0.0)
    assert np.allclose(res.x, x0)
    assert res.losses[0] == pytest.approx(0.0, abs=1e-12)


def test_fit_loss_never_increases(mixed, rng):
    x0 = csg.flatten(mixed)
    cams = [c.anchor(mixed, x0) for c in raster.sample_cameras(0, 2)]
    targets = raster.render_targets(mixed, x0, cams, size=48)
    start = x0.copy()
    start[3] *= 1.08
    res = numeric.fit_to_images(mixed, start, targets, iters=5, lr=0.05)
    diffs = np.diff(res.losses)
    assert np.all(diffs <= 1e-15)
    assert res.losses[-1] < res.losses[0]


def test_fit_argument_validation(mixed):
    x0 = csg.flatten(mixed)
    cams = [c.anchor(mixed, x0) for c in raster.sample_cameras(0, 1)]
    targets = raster.render_targets(mixed, x0, cams, size=48)
    with pytest.raises(ValueError, match="at least one iteration"):
        numeric.fit_to_images(mixed, x0, targets, iters=0)
    with pytest.raises(ValueError, match="learning rate"):
        numeric.fit_to_images(mixed, x0, targets, lr=0.0)


def test_alg2_stays_in_subspace(two_cubes, rng):
    x0 = csg.flatten(two_cubes)
    pool = constraints.enumerate_candidates(two_cubes, x0)
    C = constraints.rows_of(list(pool)[:3])
    sub = numeric.nullspace(C)
    cams = [c.anchor(two_cubes, x0) for c in raster.sample_cameras(0, 2)]
    x = x0 + rng.normal(0, 0.04, size=two_cubes.d)
    targets = raster.render_targets(two_cubes, x, cams, size=48)
    res = numeric.project_alg2(two_cubes, sub, x, targets, iters=4, lr=0.05)
    assert np.abs(C @ res.x).max() < 1e-9
    assert res.losses[-1] <= res.losses[0] + 1e-15


def test_alg2_seed_is_least_squares(two_cubes):
    x0 = csg.flatten(two_cubes)
    pool = constraints.enumerate_candidates(two_cubes, x0)
    C = constraints.rows_of(list(pool)[:2])
    sub = numeric.nullspace(C)
    cams = [c.anchor(two_cubes, x0) for c in raster.sample_cameras(0, 1)]
    targets = raster.render_targets(two_cubes, x0, cams, size=48)
    res = numeric.project_alg2(two_cubes, sub, x0, targets, iters=1, lr=0.05)
    y_seed, *_ = np.linalg.lstsq(sub.N, x0, rcond=None)
    seed_loss = sum(
        float(np.mean((raster.render(two_cubes, sub.N @ y_seed, t.camera, 48) - t.image) ** 2))
        for t in targets
    )
    assert res.losses[-1] <= seed_loss + 1e-12


# --- Monte-Carlo IoU ---------------------------------------------------------

def box_model(lo, hi, name="p"):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    p = csg.Primitive(kind=csg.CUBE, name=name,
                      translation=tuple((lo + hi) / 2), scale=tuple(hi - lo))
    return csg.Model(primitives=(p,), category="box")


def analytic_box_iou(lo_a, hi_a, lo_b, hi_b):
    lo_a, hi_a = np.asarray(lo_a, float), np.asarray(hi_a, float)
    lo_b, hi_b = np.asarray(lo_b, float), np.asarray(hi_b, float)
    inter = np.prod(np.clip(np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b), 0, None))
    va = np.prod(hi_a - lo_a)
    vb = np.prod(hi_b - lo_b)
    return inter / (va + vb - inter)


def test_iou_matches_analytic_boxes(rng):
    m = box_model([0, 0, 0], [1, 1, 1])
    for _ in range(5):
        shift = rng.uniform(-0.6, 0.6, size=3)
        scale = rng.uniform(0.6, 1.4, size=3)
        xa = csg.flatten(m)
        xb = np.concatenate([0.5 * scale + shift, scale])
        want = analytic_box_iou([0, 0, 0], [1, 1, 1], shift, shift + scale)
        got = numeric.iou(m, xa, xb, samples=200_000, seed=3)
        assert got == pytest.approx(want, abs=0.01)


def test_iou_identical_is_one(two_cubes):
    x = csg.flatten(two_cubes)
    assert numeric.iou(two_cubes, x, x, samples=50_000) == pytest.approx(1.0)


def test_iou_disjoint(rng):
    m = box_model([0, 0, 0], [1, 1, 1])
    xa = csg.flatten(m)
    xb = xa.copy()
    xb[0] += 5.0
    assert numeric.iou(m, xa, xb, samples=50_000) < 1e-9


def test_iou_empty_shapes():
    m = box_model([0, 0, 0], [1, 1, 1])
    x = csg.flatten(m)
    dead = x.copy()
    dead[3:6] = -1.0
    assert numeric.iou(m, dead, dead, samples=2000) == 1.0
    assert numeric.iou(m, x, dead, samples=50_000) < 1e-9


def test_iou_deterministic(two_cubes):
    x = csg.flatten(two_cubes)
    y = x.copy()
    y[0] += 0.2
    a = numeric.iou(two_cubes, x, y, samples=20_000, seed=7)
    b = numeric.iou(two_cubes, x, y, samples=20_000, seed=7)
    assert a == b


def test_iou_rejects_tiny_sample_count(two_cubes):
    x = csg.flatten(two_cubes)
    with pytest.raises(ValueError):
        numeric.iou(two_cubes, x, x, samples=10)
