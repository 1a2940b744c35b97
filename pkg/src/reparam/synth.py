"""Synthetic design variations drawn from a known constraint subspace.

Stands in for an external variation generator when testing discovery: pick a
ground-truth constraint subset, move the free coordinates, add noise, and keep
the ground truth on record so recovery can be scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reparam import csg, numeric
from reparam.constraints import CandidatePool, SemanticConstraint, rows_of
from reparam.csg import Model
from reparam.discovery import VariationSet
from reparam.numeric import Subspace


@dataclass(frozen=True)
class SyntheticSpec:
    gt_indices: tuple[int, ...]              # into the candidate pool
    offsets: tuple[tuple[float, ...], ...]   # per variation, reduced coords
    sigma: float                             # noise, fraction of bbox diagonal
    seed: int
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.labels and len(self.labels) != len(self.offsets):
            raise ValueError("label count must match offset count")


@dataclass(frozen=True)
class SynthResult:
    variations: VariationSet
    constraints: tuple[SemanticConstraint, ...]
    subspace: Subspace
    x0_hat: np.ndarray


def _base_projection(model: Model, fm: csg.FaceMap, sub: Subspace, x0: np.ndarray) -> np.ndarray:
    if fm.alg1_unsound:
        # shape-changing primitives: plain least-squares projection instead
        y, *_ = np.linalg.lstsq(sub.N, x0, rcond=None)
        return sub.N @ y
    return numeric.project_alg1(fm, sub, x0)


def synth_variations(model: Model, pool: CandidatePool, spec: SyntheticSpec) -> SynthResult:
    """Variations x_v = N (y0 + offset_v) + noise, with the ground truth recorded.

    y0 are the reduced coordinates of the projected base point, so zero offsets
    and zero noise reproduce it exactly.  Scales are clamped positive after the
    noise; offsets whose noise-free point already leaves the valid domain are
    an error.
    """
    for i in spec.gt_indices:
        if not (0 <= i < len(pool)):
            raise ValueError(f"ground-truth index {i} outside the pool")
    gt = tuple(pool[i] for i in spec.gt_indices)
    x0 = csg.flatten(model)
    fm = csg.face_map(model, x0)
    C = rows_of(gt) if gt else np.zeros((0, model.d))
    sub = numeric.nullspace(C)
    x0_hat = _base_projection(model, fm, sub, x0)
    y0 = sub.reduce(x0_hat)

    rng = np.random.default_rng(spec.seed)
    diag = csg.bbox_diagonal(model, x0)
    scale_cols = model.scale_columns()
    floor = 1e-6 * diag
    items = []
    for v, off in enumerate(spec.offsets):
        off = np.asarray(off, dtype=float)
        if off.shape != (sub.d_free,):
            raise ValueError(
                f"offset {v} has dimension {off.shape}, expected ({sub.d_free},)"
            )
        x = sub.N @ (y0 + off)
        bad = [c for c in scale_cols if x[c] <= 0]
        if bad:
            raise ValueError(f"offset {v} is infeasible (scale parameter {bad[0]} <= 0)")
        if spec.sigma > 0:
            x = x + rng.normal(0.0, spec.sigma * diag, size=model.d)
            for c in scale_cols:
                if x[c] < floor:
                    x[c] = floor
        label = spec.labels[v] if spec.labels else f"v{v + 1:02d}"
        items.append((label, x))
    return SynthResult(
        variations=VariationSet(x0=x0, items=tuple(items)),
        constraints=gt,
        subspace=sub,
        x0_hat=x0_hat,
    )


def random_spec(model: Model, pool: CandidatePool, count: int = 6, gt_size: int = 5,
                offset_scale: float = 0.15, sigma: float = 0.005,
                seed: int = 0) -> SyntheticSpec:
    """Draw a rank-increasing ground-truth subset and random feasible offsets.

    Offsets whose noise-free point would drive a scale parameter nonpositive
    (easy to hit on models with thin parts) are redrawn; persistent failures
    shrink the amplitude toward the base point, which is always feasible.
    """
    if len(pool) == 0:
        raise ValueError("candidate pool is empty")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pool))
    chosen: list[int] = []
    R = np.zeros((0, model.d))
    for i in order:
        rows = pool[int(i)].matrix()
        if R.shape[0] and numeric.in_rowspan(R, rows):
            continue
        R = np.vstack([R, rows])
        chosen.append(int(i))
        if len(chosen) >= gt_size:
            break
    if len(chosen) < gt_size:
        raise ValueError(
            f"pool supports only {len(chosen)} independent constraints, wanted {gt_size}"
        )
    x0 = csg.flatten(model)
    diag = csg.bbox_diagonal(model, x0)
    sub = numeric.nullspace(R)
    fm = csg.face_map(model, x0)
    y0 = sub.reduce(_base_projection(model, fm, sub, x0))
    scale_cols = model.scale_columns()
    offsets = []
    for _ in range(count):
        amp = offset_scale * diag
        for attempt in range(200):
            off = rng.uniform(-amp, amp, sub.d_free)
            x = sub.N @ (y0 + off)
            if all(x[c] > 0 for c in scale_cols):
                break
            if attempt % 25 == 24:
                amp *= 0.5
        else:
            raise ValueError(
                "could not draw a feasible offset (base projection has "
                "nonpositive scales?)"
            )
        offsets.append(tuple(off))
    return SyntheticSpec(
        gt_indices=tuple(chosen), offsets=tuple(offsets), sigma=sigma, seed=seed
    )
