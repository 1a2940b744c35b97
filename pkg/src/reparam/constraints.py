"""Enumerate candidate geometric relations of a model as homogeneous linear rows.

Four relation kinds are detected at the initial parameters x0: coplanarity of
axis-aligned faces, coaxiality of primitive pairs about a shared axis,
keypoint coincidence, and dimensional (scale) equality.  Each candidate is a
conjunction of 1-3 rows c with semantics c.x = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reparam import csg
from reparam.csg import Model

COPLANAR = "coplanar"
COAXIAL = "coaxial"
KEYPOINT_COINCIDENT = "keypoint_coincident"
DIM_EQUAL = "dim_equal"

# greedy tie-break order, cheapest-to-explain relations first
KIND_PRIORITY = {DIM_EQUAL: 0, COPLANAR: 1, COAXIAL: 2, KEYPOINT_COINCIDENT: 3}

_ROW_ARITY = {COPLANAR: 1, DIM_EQUAL: 1, COAXIAL: 2, KEYPOINT_COINCIDENT: 3}


def _canonical_row(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    mx = np.abs(c).max()
    if mx == 0:
        raise ValueError("constraint row must have a nonzero coefficient")
    c = c / mx
    for v in c:
        if v != 0:
            if v < 0:
                c = -c
            break
    return c


def row_key(c: np.ndarray) -> bytes:
    """Hashable identity of a row, canonicalized and rounded against float dust."""
    return np.round(_canonical_row(c), 12).tobytes()


@dataclass(frozen=True)
class ConstraintRow:
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _canonical_row(self.c))

    def key(self) -> bytes:
        return row_key(self.c)


@dataclass(frozen=True)
class SemanticConstraint:
    kind: str
    rows: tuple[ConstraintRow, ...]
    participants: tuple
    label: str

    def __post_init__(self):
        if self.kind not in _ROW_ARITY:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if len(self.rows) != _ROW_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} takes {_ROW_ARITY[self.kind]} rows, got {len(self.rows)}"
            )

    def matrix(self) -> np.ndarray:
        return np.stack([r.c for r in self.rows])

    def sort_key(self) -> tuple:
        return (KIND_PRIORITY[self.kind], self.participants)

    def row_set_key(self) -> frozenset:
        return frozenset(r.key() for r in self.rows)


@dataclass(frozen=True)
class CandidatePool:
    constraints: tuple[SemanticConstraint, ...]
    eps_rel: float
    eps_abs: float

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __getitem__(self, i: int) -> SemanticConstraint:
        return self.constraints[i]


def rows_of(constraints) -> np.ndarray:
    """Stack all rows of the given constraints, duplicates removed, as (m, d)."""
    rows, seen = [], set()
    d = None
    for sc in constraints:
        for r in sc.rows:
            d = r.c.size
            k = r.key()
            if k in seen:
                continue
            seen.add(k)
            rows.append(r.c)
    if not rows:
        return np.zeros((0, d if d is not None else 0))
    return np.stack(rows)


def _diff_row(d: int, col_a: int, col_b: int, half_a: float = 0.0,
              half_b: float = 0.0, scale_a: int = -1, scale_b: int = -1) -> np.ndarray:
    c = np.zeros(d)
    c[col_a] += 1.0
    c[col_b] -= 1.0
    if scale_a >= 0:
        c[scale_a] += half_a
    if scale_b >= 0:
        c[scale_b] -= half_b
    return c


_SIGN_NAME = {-1.0: "-", 1.0: "+"}


def enumerate_candidates(model: Model, x0: np.ndarray, eps_rel: float = 1e-5) -> CandidatePool:
    """All pairwise relations that hold at x0 within eps_rel * bbox diagonal.

    Candidates are emitted kind-by-kind (dimensional equality, coplanarity,
    coaxiality, keypoint coincidence) in primitive order, then deduplicated by
    exact row set; the first (highest-priority) occurrence wins.
    """
    x0 = np.asarray(x0, dtype=float)
    d = model.d
    if x0.shape != (d,):
        raise ValueError(f"parameter vector has dimension {x0.shape}, expected ({d},)")
    eps = eps_rel * csg.bbox_diagonal(model, x0)
    slices = model.param_slices()
    names = model.names
    P = len(model.primitives)
    out: list[SemanticConstraint] = []

    def ok(rows: list[np.ndarray]) -> bool:
        return all(abs(float(r @ x0)) <= eps for r in rows)

    # dimensional equality over every pair of scale slots
    slots = [
        (p, axis, slices[p].start + 3 + axis)
        for p in range(P)
        for axis in range(3)
    ]
    for i in range(len(slots)):
        for j in range(i + 1, len(slots)):
            pa, aa, ca = slots[i]
            pb, ab, cb = slots[j]
            row = _diff_row(d, ca, cb)
            if not ok([row]):
                continue
            out.append(
                SemanticConstraint(
                    kind=DIM_EQUAL,
                    rows=(ConstraintRow(row),),
                    participants=(pa, aa, pb, ab),
                    label=f"dim_equal({names[pa]}.s{csg.AXIS_NAMES[aa]}, "
                          f"{names[pb]}.s{csg.AXIS_NAMES[ab]})",
                )
            )

    # coplanarity: same-axis face coordinates across distinct primitives
    for p in range(P):
        for q in range(p + 1, P):
            for axis in range(3):
                for sp in (-1.0, 1.0):
                    for sq in (-1.0, 1.0):
                        row = _diff_row(
                            d,
                            slices[p].start + axis, slices[q].start + axis,
                            half_a=0.5 * sp, half_b=0.5 * sq,
                            scale_a=slices[p].start + 3 + axis,
                            scale_b=slices[q].start + 3 + axis,
                        )
                        if not ok([row]):
                            continue
                        an = csg.AXIS_NAMES[axis]
                        out.append(
                            SemanticConstraint(
                                kind=COPLANAR,
                                rows=(ConstraintRow(row),),
                                participants=(p, q, axis, int(sp), int(sq)),
                                label=f"coplanar({names[p]}.{_SIGN_NAME[sp]}{an}, "
                                      f"{names[q]}.{_SIGN_NAME[sq]}{an})",
                            )
                        )

    # coaxiality: both transverse translations agree, any axis-aligned pair
    for p in range(P):
        for q in range(p + 1, P):
            for axis in range(3):
                u, v = [a for a in range(3) if a != axis]
                rows = [
                    _diff_row(d, slices[p].start + u, slices[q].start + u),
                    _diff_row(d, slices[p].start + v, slices[q].start + v),
                ]
                if not ok(rows):
                    continue
                out.append(
                    SemanticConstraint(
                        kind=COAXIAL,
                        rows=tuple(ConstraintRow(r) for r in rows),
                        participants=(p, q, axis),
                        label=f"coaxial_{csg.AXIS_NAMES[axis]}({names[p]}, {names[q]})",
                    )
                )

    # keypoint coincidence: all three coordinates of two keypoints agree
    kps = csg.keypoints(model)
    by_prim: dict[int, list] = {}
    for kp in kps:
        by_prim.setdefault(kp.primitive_index, []).append(kp)
    for p in range(P):
        for q in range(p + 1, P):
            for ka in by_prim[p]:
                for kb in by_prim[q]:
                    rows = [ka.rows[i] - kb.rows[i] for i in range(3)]
                    if not ok(rows):
                        continue
                    out.append(
                        SemanticConstraint(
                            kind=KEYPOINT_COINCIDENT,
                            rows=tuple(ConstraintRow(r) for r in rows),
                            participants=(p, ka.point_id, q, kb.point_id),
                            label=f"keypoint({names[p]}.{ka.point_id}, "
                                  f"{names[q]}.{kb.point_id})",
                        )
                    )

    # merge identical row sets, keeping the first occurrence
    seen: set[frozenset] = set()
    unique = []
    for sc in out:
        k = sc.row_set_key()
        if k in seen:
            continue
        seen.add(k)
        unique.append(sc)
    return CandidatePool(constraints=tuple(unique), eps_rel=eps_rel, eps_abs=eps)
