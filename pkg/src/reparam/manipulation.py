"""The re-parameterized manipulation space: variation sliders, bounded free
variables, and discrete part toggles over a constraint subspace.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from reparam import csg, numeric
from reparam.constraints import SemanticConstraint, rows_of
from reparam.csg import Model
from reparam.discovery import DiscreteGroups, VariationSet
from reparam.numeric import Subspace


@dataclass(frozen=True)
class ManipulationSpace:
    model: Model
    subspace: Subspace
    x0: np.ndarray                       # original parameters
    x0_hat: np.ndarray                   # proj(x0), the base point
    labels: tuple[str, ...]              # variation slider names
    deltas: np.ndarray                   # (V, d), proj(x_i) - x0_hat
    lo: np.ndarray                       # (d_free,) bounds on reduced coords
    hi: np.ndarray
    groups: DiscreteGroups
    constraint_set: tuple[SemanticConstraint, ...]
    category: str = ""

    @property
    def d_free(self) -> int:
        return self.subspace.d_free

    @property
    def y0(self) -> np.ndarray:
        return self.subspace.reduce(self.x0_hat)

    def group_names(self) -> tuple[str, ...]:
        names = self.model.names
        return tuple("+".join(names[m] for m in g.members) for g in self.groups)

    def free_names(self) -> tuple[str, ...]:
        pnames = self.model.param_names()
        return tuple(pnames[c] for c in self.subspace.free_cols)


@dataclass(frozen=True)
class ManipulationState:
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(0))
    toggles: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=float))
        object.__setattr__(self, "toggles", tuple(bool(t) for t in self.toggles))


def default_state(space: ManipulationSpace) -> ManipulationState:
    return ManipulationState(
        weights=np.zeros(len(space.labels)),
        offsets=np.zeros(space.d_free),
        toggles=tuple(True for _ in space.groups),
    )


def build_space(model: Model, x0: np.ndarray, variations: VariationSet,
                constraint_set, groups: DiscreteGroups,
                unbounded: bool = False, project=None) -> ManipulationSpace:
    """Project the base point and every variation, then bound the free variables.

    Bounds per free variable are the min/max reduced coordinates over the
    projected base point and projected variations; `unbounded` widens them to
    infinity (the toggle for unrestricted constructive sliders).
    """
    x0 = np.asarray(x0, dtype=float)
    constraint_set = tuple(constraint_set)
    C = rows_of(constraint_set) if constraint_set else np.zeros((0, model.d))
    sub = numeric.nullspace(C)
    if project is None:
        fm = csg.face_map(model, x0)
        def project(s, x, label):
            return numeric.project_alg1(fm, s, x)

    try:
        x0_hat = project(sub, x0, "<base>")
    except numeric.ProjectionError as e:
        raise numeric.ProjectionError(f"base point: {e}") from e
    deltas, ys = [], [sub.reduce(x0_hat)]
    for label, xv in variations.items:
        try:
            xp = project(sub, xv, label)
        except numeric.ProjectionError as e:
            raise numeric.ProjectionError(f"variation {label!r}: {e}") from e
        deltas.append(xp - x0_hat)
        ys.append(sub.reduce(xp))
    ys = np.stack(ys)
    if unbounded:
        lo = np.full(sub.d_free, -np.inf)
        hi = np.full(sub.d_free, np.inf)
    else:
        lo, hi = ys.min(axis=0), ys.max(axis=0)
    return ManipulationSpace(
        model=model,
        subspace=sub,
        x0=x0,
        x0_hat=x0_hat,
        labels=variations.labels,
        deltas=np.stack(deltas) if deltas else np.zeros((0, model.d)),
        lo=lo,
        hi=hi,
        groups=groups,
        constraint_set=constraint_set,
        category=model.category,
    )


def evaluate(space: ManipulationSpace, state: ManipulationState) -> np.ndarray:
    """Weights interpolate variation deltas (normalized past total weight 1);
    offsets move free variables, clamped so reduced coordinates stay in bounds.
    """
    w = np.clip(state.weights, 0.0, 1.0)
    if w.shape != (len(space.labels),):
        raise ValueError(
            f"state has {w.shape[0]} weights, space has {len(space.labels)} variations"
        )
    o = np.asarray(state.offsets, dtype=float)
    if o.shape != (space.d_free,):
        raise ValueError(
            f"state has {o.shape[0]} offsets, space has {space.d_free} free variables"
        )
    W = float(w.sum())
    sem = w @ space.deltas if len(space.labels) else np.zeros(space.subspace.d)
    if W > 1.0:
        sem = sem / W
    y_sem = space.subspace.reduce(space.x0_hat + sem)
    o_eff = np.clip(o, space.lo - y_sem, space.hi - y_sem)
    if not np.allclose(o_eff, o, rtol=0.0, atol=1e-12):
        warnings.warn("free-variable offset out of bounds; clamped", stacklevel=2)
    return space.x0_hat + sem + space.subspace.N @ o_eff


def visible_mask(space: ManipulationSpace, state: ManipulationState) -> tuple[bool, ...]:
    """Per-primitive presence flags for the state's group toggles."""
    toggles = state.toggles
    if toggles and len(toggles) != len(space.groups):
        raise ValueError(
            f"state has {len(toggles)} toggles, space has {len(space.groups)} groups"
        )
    mask = [True] * len(space.model.primitives)
    for gi, group in enumerate(space.groups):
        on = toggles[gi] if gi < len(toggles) else True
        if not on:
            for m in group.members:
                mask[m] = False
    return tuple(mask)


def bounds_check(space: ManipulationSpace, x: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff x satisfies the constraints and its free coords sit in bounds."""
    x = np.asarray(x, dtype=float)
    C = space.subspace.C
    if C.shape[0] and np.abs(C @ x).max() > 1e-6:
        return False
    y = space.subspace.reduce(x)
    return bool(np.all(y >= space.lo - tol) and np.all(y <= space.hi + tol))
