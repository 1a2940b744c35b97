"""Linear-algebra core: null spaces, constrained projections, image-loss descent,
and Monte-Carlo volume IoU.

The central object is a Subspace {x : Cx = 0} with an identity-retaining basis
N: every free (non-pivot) parameter keeps its own coordinate, so reduced
coordinates read off directly as y = x[free_cols].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from reparam import csg, raster
from reparam.csg import FaceMap, Model


class ProjectionError(ValueError):
    """Projection produced a vector outside the valid parameter domain."""


@dataclass(frozen=True)
class Subspace:
    """The feasible set {x : Cx = 0} with basis N and column bookkeeping."""

    C: np.ndarray               # (m, d)
    N: np.ndarray               # (d, d_free)
    pivot_cols: tuple[int, ...]
    free_cols: tuple[int, ...]

    @property
    def d(self) -> int:
        return self.C.shape[1]

    @property
    def d_free(self) -> int:
        return self.N.shape[1]

    @property
    def rank(self) -> int:
        return len(self.pivot_cols)

    def reduce(self, x: np.ndarray) -> np.ndarray:
        """Reduced coordinates of x (exact for x in the subspace)."""
        return np.asarray(x, dtype=float)[list(self.free_cols)]


def nullspace(C: np.ndarray, pivot_tol: float = 1e-10) -> Subspace:
    """Gauss-Jordan RREF with partial pivoting; identity-retaining basis.

    Rows are normalized to unit max-abs before elimination so the pivot
    tolerance is scale-free.  m = 0 yields the full space (N = identity).
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.size == 0 and C.shape[0] != 0:
        raise ValueError("constraint matrix has no columns")
    m, d = C.shape
    R = C.copy()
    for i in range(m):
        mx = np.abs(R[i]).max()
        if mx > 0:
            R[i] /= mx
    pivots: list[tuple[int, int]] = []
    r = 0
    for col in range(d):
        if r >= m:
            break
        p = r + int(np.argmax(np.abs(R[r:, col])))
        if abs(R[p, col]) <= pivot_tol:
            continue
        if p != r:
            R[[r, p]] = R[[p, r]]
        R[r] /= R[r, col]
        others = np.arange(m) != r
        R[others] -= np.outer(R[others, col], R[r])
        pivots.append((r, col))
        r += 1
    pivot_cols = tuple(c for _, c in pivots)
    taken = set(pivot_cols)
    free_cols = tuple(c for c in range(d) if c not in taken)
    N = np.zeros((d, len(free_cols)))
    for j, fc in enumerate(free_cols):
        N[fc, j] = 1.0
        for pr, pc in pivots:
            N[pc, j] = -R[pr, fc]
    return Subspace(C=C, N=N, pivot_cols=pivot_cols, free_cols=free_cols)


def full_space(d: int) -> Subspace:
    return nullspace(np.zeros((0, d)))


def in_rowspan(C: np.ndarray, rows: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff every row of `rows` lies in the row space of C."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0:
        return True
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] == 0:
        return bool(np.abs(rows).max() <= tol)
    # least-squares coefficients of each row against the C rows
    sol, *_ = np.linalg.lstsq(C.T, rows.T, rcond=None)
    resid = C.T @ sol - rows.T
    return bool(np.abs(resid).max() <= tol)


# ---------------------------------------------------------------------------
# Algorithm-1 projection: weighted least squares on face coordinates

def project_alg1(fm: FaceMap, sub: Subspace, x: np.ndarray) -> np.ndarray:
    """Project x onto the subspace, minimizing face-shift volume cost.

    Solves y* = argmin_y ||A(QNy - Qx)||^2 with A = diag(sqrt(a)) in a single
    least-squares solve (minimum-norm on rank deficiency) and returns N y*.
    Top-radius parameters carry no face coordinate; their free coordinates are
    copied through from x unchanged.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (sub.d,):
        raise ValueError(f"parameter vector has dimension {x.shape}, expected ({sub.d},)")
    A = np.sqrt(fm.weights)
    M = A[:, None] * (fm.Q @ sub.N)
    b = A * (fm.Q @ x)
    y, *_ = np.linalg.lstsq(M, b, rcond=None)
    if fm.top_radius_cols:
        passthrough = set(fm.top_radius_cols)
        for j, fc in enumerate(sub.free_cols):
            if fc in passthrough:
                y[j] = x[fc]
    xs = sub.N @ y
    for c in fm.scale_cols:
        if xs[c] <= 0:
            raise ProjectionError(f"projection left feasible region (parameter {c} <= 0)")
    return xs


# ---------------------------------------------------------------------------
# finite-difference descent shared by the two image-loss optimizers

MAX_HALVINGS = 8


@dataclass
class DescentResult:
    """Final point plus the accepted-loss trajectory (losses[0] = start)."""

    x: np.ndarray
    losses: list[float] = field(default_factory=list)


def _descend(z0: np.ndarray, loss_fn, h: float, iters: int, lr: float) -> DescentResult:
    z = np.asarray(z0, dtype=float).copy()
    best = float(loss_fn(z))
    hist = [best]
    for _ in range(iters):
        g = np.zeros_like(z)
        for i in range(z.size):
            zp, zm = z.copy(), z.copy()
            zp[i] += h
            zm[i] -= h
            g[i] = (loss_fn(zp) - loss_fn(zm)) / (2.0 * h)
        if not np.any(g):
            break
        step = lr
        moved = False
        for _ in range(MAX_HALVINGS + 1):
            cand = z - step * g
            lc = float(loss_fn(cand))
            if lc < best:
                z, best, moved = cand, lc, True
                break
            step *= 0.5
        if not moved:
            break
        hist.append(best)
    return DescentResult(x=z, losses=hist)


def _eval_safe(model: Model, x: np.ndarray, scale_floor: float) -> np.ndarray:
    """Clamp to the renderable domain: scales above a floor, top radius in [0,1]."""
    x2 = np.array(x, dtype=float)
    for c in model.scale_columns():
        if x2[c] < scale_floor:
            x2[c] = scale_floor
    for c in model.top_radius_columns():
        x2[c] = min(max(x2[c], 0.0), 1.0)
    return x2


def _check_descent_args(iters: int, lr: float) -> None:
    if iters < 1:
        raise ValueError("need at least one iteration")
    if lr <= 0:
        raise ValueError("learning rate must be positive")


def project_alg2(model: Model, sub: Subspace, x: np.ndarray,
                 targets: list[raster.RenderTarget],
                 iters: int = 200, lr: float = 0.05) -> DescentResult:
    """Project x onto the subspace by descending the image-difference loss.

    Descends mean squared pixel difference between renders of N y and the
    target images, in reduced coordinates y (so the result always satisfies
    the constraints).  Starts from the unweighted least-squares projection.
    Degenerate scales are clamped at evaluation time only.
    """
    _check_descent_args(iters, lr)
    x = np.asarray(x, dtype=float)
    y0, *_ = np.linalg.lstsq(sub.N, x, rcond=None)
    diag = csg.bbox_diagonal(model, _eval_safe(model, x, 1e-6))
    floor = 1e-4 * diag
    h = 1e-3 * diag

    def loss(y: np.ndarray) -> float:
        xe = _eval_safe(model, sub.N @ y, floor)
        total = 0.0
        for t in targets:
            img = raster.render(model, xe, t.camera, t.image.shape[0])
            diff = img - t.image
            total += float(np.mean(diff * diff))
        return total

    res = _descend(y0, loss, h, iters, lr)
    return DescentResult(x=sub.N @ res.x, losses=res.losses)


def fit_to_images(model: Model, x0: np.ndarray,
                  targets: list[raster.RenderTarget],
                  iters: int = 30, lr: float = 0.05,
                  lam: float = 0.001) -> DescentResult:
    """Fit the full parameter vector to target images by descending pixel_loss."""
    _check_descent_args(iters, lr)
    x0 = np.asarray(x0, dtype=float)
    diag = csg.bbox_diagonal(model, x0)
    floor = 1e-4 * diag
    h = 1e-3 * diag

    def loss(x: np.ndarray) -> float:
        return raster.pixel_loss(model, _eval_safe(model, x, floor), x0, targets, lam)

    return _descend(x0, loss, h, iters, lr)


# ---------------------------------------------------------------------------
# Monte-Carlo volume IoU

def _sample_box(model: Model, xs: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray] | None:
    """Joint AABB of all non-degenerate primitives across the given vectors."""
    lo, hi = None, None
    for x in xs:
        for sl in model.param_slices():
            t, s = x[sl][0:3], x[sl][3:6]
            if s.min() <= 0:
                continue
            plo, phi = t - 0.5 * s, t + 0.5 * s
            lo = plo if lo is None else np.minimum(lo, plo)
            hi = phi if hi is None else np.maximum(hi, phi)
    if lo is None:
        return None
    return lo, hi


def iou(model: Model, xa: np.ndarray, xb: np.ndarray,
        samples: int = 200_000, seed: int = 0) -> float:
    """Monte-Carlo intersection-over-union of two parameterizations.

    Samples uniformly over the union AABB of both shapes; deterministic for a
    fixed seed.  Two empty shapes count as identical (IoU 1).
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    box = _sample_box(model, [xa, xb])
    if box is None:
        return 1.0
    lo, hi = box
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(samples, 3))
    in_a = csg.contains(model, xa, pts)
    in_b = csg.contains(model, xb, pts)
    union = int(np.count_nonzero(in_a | in_b))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(in_a & in_b))
    return inter / union
