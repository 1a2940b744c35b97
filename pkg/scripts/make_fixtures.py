"""Build the bundled fixture documents under src/reparam/fixtures/.

Writes five models, the chair variation sets (continuous + discrete), and the
chair manipulation space produced by running discovery on those fixtures.
The chair ground truth is selected to span exactly 37 constraint rows so the
free dimensionality lands at 11; generation fails loudly if discovery on the
written fixtures does not reproduce that.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from reparam import (  # noqa: E402
    constraints,
    csg,
    discovery,
    documents,
    manipulation,
    numeric,
    synth,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "src", "reparam", "fixtures")

GT_RANK = 37          # chair: 48 params - 37 = 11 free dimensions
EXCITE_FLOOR = 0.02   # min relative violation of any non-implied candidate
SIGMA = 0.003         # chair variation noise, relative to the bbox diagonal

ACCEPT = discovery.DiscoverConfig(iou_samples=30_000, camera_count=3,
                                  render_size=128)


def cube(name, t, s):
    return csg.Primitive(kind=csg.CUBE, name=name, translation=t, scale=s)


def build_bottle() -> csg.Model:
    return csg.Model(category="bottle", primitives=(
        csg.Primitive(kind=csg.CYLINDER_Y, name="body",
                      translation=(0.0, 0.35, 0.0), scale=(0.5, 0.7, 0.5)),
        csg.Primitive(kind=csg.CONE_CYLINDER_Y, name="neck",
                      translation=(0.0, 0.825, 0.0), scale=(0.3, 0.25, 0.3),
                      top_radius=0.6),
        cube("cap", (0.0, 0.99, 0.0), (0.16, 0.08, 0.16)),
    ))


def build_camera() -> csg.Model:
    return csg.Model(category="camera", primitives=(
        cube("body", (0.0, 0.0, 0.0), (1.6, 1.0, 0.7)),
        csg.Primitive(kind=csg.CYLINDER_Z, name="lens",
                      translation=(0.25, 0.0, 0.55), scale=(0.6, 0.6, 0.4)),
        csg.Primitive(kind=csg.CYLINDER_Y, name="button",
                      translation=(-0.55, 0.55, 0.0), scale=(0.22, 0.1, 0.22)),
        cube("viewfinder", (0.45, 0.575, 0.0), (0.35, 0.15, 0.3)),
    ))


def build_chair() -> csg.Model:
    # leg outer faces sit flush with the seat edges (0.41 + 0.04 = 0.45)
    legs = [
        cube(f"leg_{tag}", (sx * 0.41, 0.2, sz * 0.41), (0.08, 0.4, 0.08))
        for tag, sx, sz in (("fl", 1, 1), ("fr", -1, 1), ("bl", 1, -1), ("br", -1, -1))
    ]
    # arms share the leg cross-section, hang off the seat edge, and meet the
    # front face of the back rest
    return csg.Model(category="chair", primitives=(
        cube("seat", (0.0, 0.46, 0.0), (0.9, 0.12, 0.9)),
        *legs,
        cube("back", (0.0, 0.92, -0.4), (0.9, 0.8, 0.1)),
        cube("arm_l", (0.41, 0.645, 0.0), (0.08, 0.25, 0.7)),
        cube("arm_r", (-0.41, 0.645, 0.0), (0.08, 0.25, 0.7)),
    ))


def build_table() -> csg.Model:
    legs = [
        cube(f"leg_{tag}", (sx * 0.6, 0.34, sz * 0.35), (0.1, 0.68, 0.1))
        for tag, sx, sz in (("fl", 1, 1), ("fr", -1, 1), ("bl", 1, -1), ("br", -1, -1))
    ]
    return csg.Model(category="table", primitives=(
        cube("top", (0.0, 0.72, 0.0), (1.4, 0.08, 0.9)),
        *legs,
        cube("stretcher", (0.0, 0.15, 0.0), (1.1, 0.06, 0.08)),
    ))


def build_car() -> csg.Model:
    wheels = [
        csg.Primitive(kind=csg.CYLINDER_X, name=f"wheel_{tag}",
                      translation=(sx * 0.55, 0.175, sz * 0.6),
                      scale=(0.2, 0.35, 0.35))
        for tag, sx, sz in (("fl", 1, 1), ("fr", 1, -1), ("bl", -1, 1), ("br", -1, -1))
    ]
    return csg.Model(category="car", primitives=(
        cube("body", (0.0, 0.45, 0.0), (2.2, 0.5, 1.1)),
        cube("cabin", (-0.1, 0.85, 0.0), (1.1, 0.3, 0.95)),
        *wheels,
        cube("bumper", (1.15, 0.3, 0.0), (0.1, 0.2, 1.1)),
    ))


MODELS = {
    "bottle": build_bottle,
    "camera": build_camera,
    "chair": build_chair,
    "table": build_table,
    "car": build_car,
}


def pick_ground_truth(model: csg.Model, pool: constraints.CandidatePool,
                      target_rank: int) -> list[int]:
    """Greedy rank-increasing subset hitting the target rank exactly.

    Single-row kinds first keeps the selection flexible enough to land on the
    target without overshooting.
    """
    order = sorted(range(len(pool)),
                   key=lambda i: (pool[i].matrix().shape[0], pool[i].sort_key()))
    chosen: list[int] = []
    rows = np.zeros((0, model.d))
    rank = 0
    for i in order:
        cand = pool[i].matrix()
        stacked = np.vstack([rows, cand])
        new_rank = np.linalg.matrix_rank(stacked, tol=1e-9)
        if new_rank > rank and new_rank <= target_rank:
            chosen.append(i)
            rows, rank = stacked, new_rank
        if rank == target_rank:
            return chosen
    raise SystemExit(
        f"pool only supports rank {rank}, needed {target_rank}; adjust geometry")


def excitation(pool, gt_rows, variations) -> float:
    """Smallest worst-case violation of any candidate outside the gt span."""
    worst = np.inf
    for sc in pool:
        if numeric.in_rowspan(gt_rows, sc.matrix()):
            continue
        best_v = max(np.abs(sc.matrix() @ xv).max() for _, xv in variations.items)
        worst = min(worst, best_v)
    return worst


def chair_offsets(model, sub, y0, rng, diag):
    """One bounded random offset per variation, rejected until feasible."""
    x0 = csg.flatten(model)
    amp = np.empty(sub.d_free)
    for j, col in enumerate(sub.free_cols):
        amp[j] = max(0.35 * abs(x0[col]), 0.05 * diag)
    for _ in range(200):
        o = rng.uniform(-1.0, 1.0, sub.d_free) * amp
        x = sub.N @ (y0 + o)
        scales = np.concatenate([x[model.column(i, "sx"):model.column(i, "sx") + 3]
                                 for i in range(len(model.primitives))])
        ref = np.concatenate([x0[model.column(i, "sx"):model.column(i, "sx") + 3]
                              for i in range(len(model.primitives))])
        if np.all(scales >= 0.25 * ref):
            return o
    raise SystemExit("could not sample a feasible chair offset")


def make_chair_fixtures(seed_limit: int) -> None:
    model = build_chair()
    x0 = csg.flatten(model)
    diag = csg.bbox_diagonal(model, x0)
    pool = constraints.enumerate_candidates(model, x0)
    print(f"chair pool: {len(pool)} candidates")

    gt_indices = pick_ground_truth(model, pool, GT_RANK)
    gt = [pool[i] for i in gt_indices]
    gt_rows = constraints.rows_of(gt)
    sub = numeric.nullspace(gt_rows)
    assert sub.rank == GT_RANK and sub.d_free == model.d - GT_RANK
    print(f"ground truth: {len(gt)} constraints, rank {sub.rank}, "
          f"{sub.d_free} free dims")

    fm = csg.face_map(model, x0)
    x0_hat = numeric.project_alg1(fm, sub, x0)
    y0 = sub.reduce(x0_hat)

    for seed in range(seed_limit):
        rng = np.random.default_rng(seed)
        offsets = tuple(chair_offsets(model, sub, y0, rng, diag) for _ in range(6))
        spec = synth.SyntheticSpec(gt_indices=tuple(gt_indices), offsets=offsets,
                                   sigma=SIGMA, seed=seed)
        try:
            res = synth.synth_variations(model, pool, spec)
        except ValueError as e:
            print(f"seed {seed}: synth failed ({e}); retrying")
            continue
        floor = excitation(pool, gt_rows, res.variations)
        if floor < EXCITE_FLOOR * diag:
            print(f"seed {seed}: weakest excitation {floor / diag:.4f} diag; retrying")
            continue
        out = discovery.discover(model, x0, res.variations, ACCEPT, pool=pool)
        kept_rank = numeric.nullspace(constraints.rows_of(out.constraints)).rank
        d_free = model.d - kept_rank
        print(f"seed {seed}: discovery kept {len(out.constraints)} constraints, "
              f"rank {kept_rank}, d_free {d_free}")
        if d_free != sub.d_free:
            continue
        break
    else:
        raise SystemExit("no seed reproduced the ground-truth dimensionality")

    base_hash = documents.model_hash(model)
    gt_block = documents.ground_truth_block(
        gt, gt_indices, SIGMA, seed, rank=sub.rank, d_free=sub.d_free)
    documents.save_variations(res.variations, base_hash, "synthetic",
                              os.path.join(FIXTURES, "chair.vars"), gt_block)
    print("wrote chair.vars")

    groups = make_discrete_variations(model, x0, base_hash)
    space = manipulation.build_space(model, x0, res.variations,
                                     out.constraints, groups)
    documents.save_reparam(space, os.path.join(FIXTURES, "chair.reparam"))
    documents.save_trace(out.trace, base_hash,
                         os.path.join(FIXTURES, "chair.trace"))
    print(f"wrote chair.reparam ({space.d_free} sliders, "
          f"{len(space.groups)} groups) and chair.trace")


def make_discrete_variations(model, x0, base_hash) -> discovery.DiscreteGroups:
    def collapsed(names):
        x = x0.copy()
        for i, p in enumerate(model.primitives):
            if p.name in names:
                c = model.column(i, "sx")
                x[c:c + 3] = 1e-6
        return x

    vs = discovery.VariationSet(x0=x0, items=(
        ("armchair", x0.copy()),
        ("stool", collapsed({"back", "arm_l", "arm_r"})),
        ("bench", collapsed({"arm_l", "arm_r"})),
    ))
    documents.save_variations(vs, base_hash, "manual",
                              os.path.join(FIXTURES, "chair_discrete.vars"))
    print("wrote chair_discrete.vars")

    from reparam import raster
    cams = [c.anchor(model, x0)
            for c in raster.sample_cameras(ACCEPT.camera_seed, ACCEPT.camera_count)]
    groups = discovery.discover_discrete(model, vs, cams,
                                         ACCEPT.discrete_threshold,
                                         ACCEPT.render_size)
    names = model.names
    table = {tuple(names[m] for m in g.members): g.absent_in for g in groups}
    print(f"discrete groups: {table}")
    want = {("back",): ("stool",), ("arm_l", "arm_r"): ("stool", "bench")}
    if table != want:
        raise SystemExit(f"unexpected discrete grouping: {table}")
    return groups


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--models-only", action="store_true")
    ap.add_argument("--seed-limit", type=int, default=20)
    args = ap.parse_args()

    os.makedirs(FIXTURES, exist_ok=True)
    for name, build in MODELS.items():
        model = build()
        path = os.path.join(FIXTURES, f"{name}.model")
        documents.save_model(model, path)
        print(f"wrote {name}.model (d={model.d})")

    if not args.models_only:
        make_chair_fixtures(args.seed_limit)
    return 0


if __name__ == "__main__":
    sys.exit(main())
