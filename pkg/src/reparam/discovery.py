"""Constraint discovery: greedy ranking by projection distortion, change-point
cutoff on the pixel-distortion curve, and discrete optional-part grouping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reparam import constraints as cons
from reparam import csg, numeric, parallel, raster
from reparam.constraints import CandidatePool, SemanticConstraint, rows_of
from reparam.csg import Model
from reparam.numeric import ProjectionError, Subspace


class DiscoveryError(RuntimeError):
    pass


@dataclass(frozen=True)
class VariationSet:
    """Base parameters plus labeled design variations sharing the same model."""

    x0: np.ndarray
    items: tuple[tuple[str, np.ndarray], ...]

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        items = tuple((str(l), np.asarray(v, dtype=float)) for l, v in self.items)
        object.__setattr__(self, "items", items)
        d = self.x0.shape[0]
        labels = [l for l, _ in items]
        if len(set(labels)) != len(labels):
            raise DiscoveryError("variation labels must be unique")
        for l, v in items:
            if v.shape != (d,):
                raise DiscoveryError(
                    f"variation {l!r} has dimension {v.shape}, expected ({d},)"
                )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.items)

    @property
    def vectors(self) -> tuple[np.ndarray, ...]:
        return tuple(v for _, v in self.items)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class DiscoverConfig:
    eps_rel: float = 1e-5
    iou_samples: int = 200_000
    iou_seed: int = 0
    camera_seed: int = 0
    camera_count: int = 5
    render_size: int = 256
    discrete_threshold: float = 1e-4
    aggregator: str = "mean"      # or "max" across variations
    alg2_iters: int = 200
    alg2_lr: float = 0.05
    # Monte-Carlo IoU noise allowance when asserting the distortion
    # sequence is non-decreasing
    monotonic_slack: float = 5e-3


@dataclass(frozen=True)
class GreedyPick:
    constraint: SemanticConstraint
    score: float  # cumulative volumetric distortion of the prefix ending here


@dataclass(frozen=True)
class GreedyTrace:
    picks: tuple[GreedyPick, ...]
    pixel_curve: tuple[float, ...]       # pixel distortion of each pick prefix
    cutoff_index: int                    # number of picks kept
    deferred: tuple[tuple[SemanticConstraint, int], ...]  # (constraint, round)


@dataclass(frozen=True)
class DiscreteGroup:
    members: tuple[int, ...]        # primitive indices
    absent_in: tuple[str, ...]      # variation labels where the group vanishes


@dataclass(frozen=True)
class DiscreteGroups:
    groups: tuple[DiscreteGroup, ...]

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)


@dataclass(frozen=True)
class DiscoverResult:
    constraints: tuple[SemanticConstraint, ...]
    groups: DiscreteGroups
    trace: GreedyTrace


# ---------------------------------------------------------------------------
# projection routing: face-weighted least squares, or image loss for models
# whose primitives can change shape

def _make_projector(model: Model, fm: csg.FaceMap, config: DiscoverConfig,
                    variations: VariationSet, cameras: list[raster.Camera]):
    if not fm.alg1_unsound:
        def project(sub: Subspace, x: np.ndarray, label: str) -> np.ndarray:
            return numeric.project_alg1(fm, sub, x)
        return project

    target_cache: dict[str, list[raster.RenderTarget]] = {}

    def project(sub: Subspace, x: np.ndarray, label: str) -> np.ndarray:
        if label not in target_cache:
            target_cache[label] = [
                raster.RenderTarget(camera=c, image=raster.render(model, x, c, config.render_size))
                for c in cameras
            ]
        res = numeric.project_alg2(
            model, sub, x, target_cache[label],
            iters=config.alg2_iters, lr=config.alg2_lr,
        )
        return res.x

    return project


def _aggregate(values: list[float], how: str) -> float:
    if how == "max":
        return max(values)
    return float(sum(values) / len(values))


def greedy_rank(pool: CandidatePool, variations: VariationSet, model: Model,
                config: DiscoverConfig = DiscoverConfig(),
                cameras: list[raster.Camera] | None = None,
                ) -> tuple[list[GreedyPick], list[tuple[SemanticConstraint, int]]]:
    """Forward-select constraints by mean projection distortion across variations.

    Each round scores every remaining candidate unioned with the chosen set
    (candidates whose rows are already implied are set aside instead) and picks
    the lowest-distortion one; ties break toward simpler relation kinds, then
    participant order.  Returns the pick sequence plus the deferred candidates
    with the round at which they became redundant.
    """
    if len(pool) == 0:
        raise ValueError("candidate pool is empty")
    if len(variations) == 0:
        raise ValueError("need at least one variation")
    fm = csg.face_map(model, variations.x0)
    if cameras is None:
        cameras = [
            c.anchor(model, variations.x0)
            for c in raster.sample_cameras(config.camera_seed, config.camera_count)
        ]
    project = _make_projector(model, fm, config, variations, cameras)

    active = list(pool)
    chosen: list[SemanticConstraint] = []
    picks: list[GreedyPick] = []
    deferred: list[tuple[SemanticConstraint, int]] = []
    # candidates that project a variation to the same point have the same
    # distortion there, so key the expensive volume overlap on the projection
    iou_cache: dict[tuple[str, bytes], float] = {}

    while active:
        C = rows_of(chosen) if chosen else np.zeros((0, model.d))
        keep = []
        for sc in active:
            if chosen and numeric.in_rowspan(C, sc.matrix()):
                deferred.append((sc, len(picks)))
            else:
                keep.append(sc)
        active = keep
        if not active:
            break

        def score_one(sc: SemanticConstraint) -> float:
            sub = numeric.nullspace(np.vstack([C, sc.matrix()]))
            dists = []
            for label, xv in variations.items:
                try:
                    xp = project(sub, xv, label)
                except ProjectionError:
                    return float("inf")
                key = (label, np.round(xp, 9).tobytes())
                if key not in iou_cache:
                    iou_cache[key] = numeric.iou(
                        model, xv, xp, config.iou_samples, config.iou_seed)
                dists.append(1.0 - iou_cache[key])
            return _aggregate(dists, config.aggregator)

        scores = parallel.pmap(score_one, active)
        order = sorted(
            range(len(active)), key=lambda i: (scores[i],) + active[i].sort_key()
        )
        best = order[0]
        if scores[best] == float("inf"):
            break  # nothing feasible can be added this round
        picks.append(GreedyPick(constraint=active[best], score=scores[best]))
        chosen.append(active[best])
        active.pop(best)
    return picks, deferred


def cutoff(curve) -> int:
    """Count of prefix entries to keep, from a change point in the derivative.

    Takes the central-difference derivative (one-sided at the ends), finds the
    single split minimizing the within-segment sum of squares, and accepts it
    only when the between-segment mean gap exceeds 3x the pooled within-segment
    standard deviation.  No accepted change point keeps the full curve.
    """
    c = np.asarray(curve, dtype=float)
    n = c.size
    if n < 3:
        raise ValueError("curve too short")
    g = np.empty(n)
    g[0] = c[1] - c[0]
    g[-1] = c[-1] - c[-2]
    g[1:-1] = (c[2:] - c[:-2]) / 2.0

    best_k, best_sse = -1, np.inf
    for k in range(1, n):
        left, right = g[:k], g[k:]
        sse = float(((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum())
        if sse < best_sse - 1e-15:
            best_k, best_sse = k, sse
    left, right = g[:best_k], g[best_k:]
    gap = abs(float(right.mean() - left.mean()))
    pooled = np.sqrt(best_sse / (n - 2))
    if gap > 3.0 * pooled:
        return best_k
    return n


def pixel_distortion(model: Model, variations: VariationSet, sub: Subspace,
                     cameras: list[raster.Camera], size: int = 256,
                     project=None,
                     target_renders: dict[str, list[np.ndarray]] | None = None) -> float:
    """Mean per-pixel MSE between renders of each variation and its projection."""
    if project is None:
        fm = csg.face_map(model, variations.x0)
        def project(s, x, label):
            return numeric.project_alg1(fm, s, x)
    cameras = [c.anchor(model, variations.x0) for c in cameras]
    total, count = 0.0, 0
    for label, xv in variations.items:
        xp = project(sub, xv, label)
        if target_renders is not None and label in target_renders:
            refs = target_renders[label]
        else:
            refs = [raster.render(model, xv, cam, size) for cam in cameras]
            if target_renders is not None:
                target_renders[label] = refs
        for cam, ref in zip(cameras, refs):
            img = raster.render(model, xp, cam, size)
            diff = img - ref
            total += float(np.mean(diff * diff))
            count += 1
    return total / count


def discover_discrete(model: Model, variations: VariationSet,
                      cameras: list[raster.Camera] | None = None,
                      threshold: float = 1e-4, size: int = 256) -> DiscreteGroups:
    """Mark primitives whose removal leaves a variation's renders unchanged.

    A primitive is optional in a variation when the mean per-pixel MSE between
    renders with and without it stays below the threshold; primitives optional
    in exactly the same nonempty set of variations form one group.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if cameras is None:
        cameras = raster.sample_cameras(0, 5)
    cameras = [c.anchor(model, variations.x0) for c in cameras]
    P = len(model.primitives)
    optional: list[set[str]] = [set() for _ in range(P)]
    for label, xv in variations.items:
        full = [raster.render(model, xv, cam, size) for cam in cameras]
        for p in range(P):
            mask = [i != p for i in range(P)]
            err = 0.0
            for cam, ref in zip(cameras, full):
                img = raster.render(model, xv, cam, size, visible=mask)
                diff = img - ref
                err += float(np.mean(diff * diff))
            if err / len(cameras) < threshold:
                optional[p].add(label)

    by_set: dict[frozenset, list[int]] = {}
    for p in range(P):
        if optional[p]:
            by_set.setdefault(frozenset(optional[p]), []).append(p)
    label_order = {l: i for i, l in enumerate(variations.labels)}
    groups = [
        DiscreteGroup(
            members=tuple(sorted(members)),
            absent_in=tuple(sorted(s, key=label_order.get)),
        )
        for s, members in by_set.items()
    ]
    groups.sort(key=lambda g: g.members)
    return DiscreteGroups(groups=tuple(groups))


def discover(model: Model, x0: np.ndarray, variations: VariationSet,
             config: DiscoverConfig = DiscoverConfig(),
             pool: CandidatePool | None = None) -> DiscoverResult:
    """Full pipeline: enumerate, rank, cut at the pixel-distortion change point.

    Returns the kept constraints (including any that became implied before the
    cutoff round), the discrete optional-part groups, and the audit trace.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.array_equal(x0, variations.x0):
        raise DiscoveryError("variation set base point differs from x0")
    if pool is None:
        pool = cons.enumerate_candidates(model, x0, config.eps_rel)
    cameras = [
        c.anchor(model, x0)
        for c in raster.sample_cameras(config.camera_seed, config.camera_count)
    ]
    picks, deferred = greedy_rank(pool, variations, model, config, cameras)

    finite = [p.score for p in picks if np.isfinite(p.score)]
    for a, b in zip(finite, finite[1:]):
        if b < a - config.monotonic_slack:
            raise DiscoveryError(
                f"greedy distortion decreased from {a:.6f} to {b:.6f}; "
                "projection or scoring is inconsistent"
            )

    fm = csg.face_map(model, x0)
    project = _make_projector(model, fm, config, variations, cameras)
    target_renders: dict[str, list[np.ndarray]] = {}
    curve = []
    for j in range(1, len(picks) + 1):
        sub = numeric.nullspace(rows_of([p.constraint for p in picks[:j]]))
        curve.append(
            pixel_distortion(
                model, variations, sub, cameras, config.render_size,
                project=project, target_renders=target_renders,
            )
        )
    cut = cutoff(curve) if len(curve) >= 3 else len(curve)
    kept = [p.constraint for p in picks[:cut]]
    kept += [sc for sc, rnd in deferred if rnd <= cut]
    groups = discover_discrete(
        model, variations, cameras, config.discrete_threshold, config.render_size
    )
    trace = GreedyTrace(
        picks=tuple(picks),
        pixel_curve=tuple(curve),
        cutoff_index=cut,
        deferred=tuple(deferred),
    )
    return DiscoverResult(constraints=tuple(kept), groups=groups, trace=trace)
