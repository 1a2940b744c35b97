"""Command-line pipeline around the engine.

Subcommands: enumerate, synth, fit, discover, reparam, render, export-mesh,
serve.  Exit status 0 on success, 1 on stage failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from reparam import (
    constraints,
    csg,
    discovery,
    documents,
    manipulation,
    numeric,
    raster,
    synth,
)
from reparam.csg import ModelError
from reparam.discovery import DiscoverConfig, DiscoveryError
from reparam.documents import DocumentError
from reparam.numeric import ProjectionError


def _load_state(space, spec: str):
    """Parse an evaluate-state description: 'default' or a JSON object/file."""
    if spec == "default":
        return manipulation.default_state(space)
    if spec.lstrip().startswith("{"):
        raw = json.loads(spec)
    else:
        with open(spec) as f:
            raw = json.load(f)
    if not isinstance(raw, dict):
        raise ValueError("state must be a JSON object")
    unknown = set(raw) - {"weights", "offsets", "toggles"}
    if unknown:
        raise ValueError(f"unknown state field {sorted(unknown)[0]!r}")
    weights = np.zeros(len(space.labels))
    label_index = {l: i for i, l in enumerate(space.labels)}
    for label, value in raw.get("weights", {}).items():
        if label not in label_index:
            raise ValueError(f"unknown variation label {label!r}")
        weights[label_index[label]] = float(value)
    offsets = np.asarray(raw.get("offsets", np.zeros(space.d_free)), dtype=float)
    group_index = {n: i for i, n in enumerate(space.group_names())}
    toggles = [True] * len(space.groups)
    for name, on in raw.get("toggles", {}).items():
        if name not in group_index:
            raise ValueError(f"unknown group {name!r}")
        toggles[group_index[name]] = bool(on)
    return manipulation.ManipulationState(
        weights=weights, offsets=offsets, toggles=tuple(toggles)
    )


def _config_from(args) -> DiscoverConfig:
    return DiscoverConfig(
        eps_rel=args.eps_rel,
        iou_samples=args.iou_samples,
        iou_seed=args.seed,
        camera_seed=args.camera_seed,
        camera_count=args.cameras,
        render_size=args.render_size,
        discrete_threshold=args.threshold,
        aggregator=args.aggregator,
    )


def _cmd_enumerate(args) -> int:
    model = documents.load_model(args.model)
    pool = constraints.enumerate_candidates(model, csg.flatten(model), args.eps_rel)
    doc = documents.pool_document(pool, documents.model_hash(model))
    documents._write(doc, args.out)
    print(f"{len(pool)} candidate constraints -> {args.out}")
    return 0


def _cmd_synth(args) -> int:
    model = documents.load_model(args.model)
    x0 = csg.flatten(model)
    pool = constraints.enumerate_candidates(model, x0, args.eps_rel)
    spec = synth.random_spec(
        model, pool,
        count=args.count, gt_size=args.gt_size,
        offset_scale=args.offset_scale, sigma=args.sigma, seed=args.seed,
    )
    res = synth.synth_variations(model, pool, spec)
    gt = documents.ground_truth_block(
        res.constraints, spec.gt_indices, args.sigma, args.seed,
        rank=res.subspace.rank, d_free=res.subspace.d_free,
    )
    documents.save_variations(
        res.variations, documents.model_hash(model), "synthetic", args.out, gt
    )
    print(
        f"{len(res.variations)} synthetic variations "
        f"(ground truth rank {res.subspace.rank}, {res.subspace.d_free} free) -> {args.out}"
    )
    return 0


def _cmd_fit(args) -> int:
    model = documents.load_model(args.model)
    targets = raster.load_targets(args.targets)
    if args.start:
        with open(args.start) as f:
            raw = json.load(f)
        x0 = np.asarray(raw["x"], dtype=float)
    else:
        x0 = csg.flatten(model)
    res = numeric.fit_to_images(
        model, x0, targets, iters=args.iters, lr=args.lr, lam=args.lam
    )
    doc = {
        "format": "fit@1",
        "x": [float(v) for v in res.x],
        "losses": [float(v) for v in res.losses],
    }
    documents._write(doc, args.out)
    print(f"loss {res.losses[0]:.6g} -> {res.losses[-1]:.6g} in {len(res.losses) - 1} steps")
    return 0


def _discrete_groups(args, model, config, fallback):
    if not args.discrete_variations:
        return fallback
    dvs, _ = documents.load_variations(args.discrete_variations, model)
    cams = [
        c.anchor(model, dvs.x0)
        for c in raster.sample_cameras(config.camera_seed, config.camera_count)
    ]
    return discovery.discover_discrete(
        model, dvs, cams, config.discrete_threshold, config.render_size
    )


def _cmd_discover(args) -> int:
    model = documents.load_model(args.model)
    vs, _ = documents.load_variations(args.variations, model)
    config = _config_from(args)
    x0 = csg.flatten(model)
    result = discovery.discover(model, x0, vs, config)
    groups = _discrete_groups(args, model, config, result.groups)
    space = manipulation.build_space(
        model, x0, vs, result.constraints, groups, unbounded=args.unbounded_free
    )
    documents.save_reparam(space, args.out)
    base_hash = documents.model_hash(model)
    trace_path = args.trace or args.out + ".trace.json"
    documents.save_trace(result.trace, base_hash, trace_path)
    with open(trace_path + ".txt", "w") as f:
        f.write(documents.trace_table(result.trace))
    print(
        f"kept {len(result.constraints)} constraints "
        f"(cut after {result.trace.cutoff_index} of {len(result.trace.picks)} ranked picks, "
        f"rest implied); {space.d_free} free variables; "
        f"{len(groups)} discrete groups -> {args.out}"
    )
    return 0


def _cmd_reparam(args) -> int:
    model = documents.load_model(args.model)
    vs, _ = documents.load_variations(args.variations, model)
    trace = documents.load_trace(args.trace, model)
    chosen = documents.chosen_constraints(trace)
    config = _config_from(args)
    groups = _discrete_groups(args, model, config, discovery.DiscreteGroups(groups=()))
    space = manipulation.build_space(
        model, csg.flatten(model), vs, chosen, groups, unbounded=args.unbounded_free
    )
    documents.save_reparam(space, args.out)
    print(f"{space.d_free} free variables, {len(space.labels)} sliders -> {args.out}")
    return 0


def _cmd_render(args) -> int:
    model = documents.load_model(args.model)
    if args.vars:
        if not args.label:
            raise ValueError("--label is required with --vars")
        vs, _ = documents.load_variations(args.vars, model)
        table = dict(vs.items)
        if args.label not in table:
            raise ValueError(f"no variation labeled {args.label!r}")
        x = table[args.label]
    else:
        x = csg.flatten(model)
    cams = raster.sample_cameras(args.seed, args.count)
    targets = raster.render_targets(model, x, cams, args.size)
    raster.save_targets(targets, args.out)
    print(f"{len(targets)} views ({args.size}x{args.size}) -> {args.out}")
    return 0


def _cmd_export_mesh(args) -> int:
    if args.reparam:
        space = documents.load_reparam(args.reparam)
        state = _load_state(space, args.state)
        x = manipulation.evaluate(space, state)
        visible = manipulation.visible_mask(space, state)
        mesh = csg.tessellate(space.model, x, segments=args.segments, visible=visible)
    else:
        model = documents.load_model(args.model)
        mesh = csg.tessellate(model, csg.flatten(model), segments=args.segments)
    with open(args.out, "w") as f:
        f.write(csg.export_obj(mesh))
    print(f"{len(mesh.vertices)} vertices, {len(mesh.faces)} triangles -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from reparam.service import build_app

    space = documents.load_reparam(args.reparam)
    app = build_app(space)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _add_discover_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps-rel", type=float, default=1e-5)
    p.add_argument("--iou-samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--camera-seed", type=int, default=0)
    p.add_argument("--cameras", type=int, default=5)
    p.add_argument("--render-size", type=int, default=256)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--aggregator", choices=("mean", "max"), default="mean")
    p.add_argument("--discrete-variations", help="separate variation document for optional-part discovery")
    p.add_argument("--unbounded-free", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reparam",
        description="Constraint discovery and slider-space re-parameterization for CSG models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="list candidate constraints of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--eps-rel", type=float, default=1e-5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("synth", help="generate synthetic variations with a recorded ground truth")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--gt-size", type=int, default=5)
    p.add_argument("--offset-scale", type=float, default=0.15)
    p.add_argument("--eps-rel", type=float, default=1e-5)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit model parameters to a rendered target pack")
    p.add_argument("--model", required=True)
    p.add_argument("--targets", required=True, help="directory with targets.json")
    p.add_argument("--out", required=True)
    p.add_argument("--start", help="JSON file with an initial parameter vector under 'x'")
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lam", type=float, default=0.001)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("discover", help="discover constraints and build a manipulation space")
    p.add_argument("--model", required=True)
    p.add_argument("--variations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="trace output path (default: <out>.trace.json)")
    _add_discover_flags(p)
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("reparam", help="rebuild a manipulation space from a saved trace")
    p.add_argument("--model", required=True)
    p.add_argument("--variations", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    _add_discover_flags(p)
    p.set_defaults(func=_cmd_reparam)

    p = sub.add_parser("render", help="render a target pack of deterministic views")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--vars", help="variation document to pick parameters from")
    p.add_argument("--label", help="variation label inside --vars")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("export-mesh", help="tessellate to an OBJ file")
    p.add_argument("--model", help="model document (ignored when --reparam is given)")
    p.add_argument("--reparam", help="manipulation-space document")
    p.add_argument("--state", default="default", help="'default', a JSON object, or a JSON file")
    p.add_argument("--segments", type=int, default=24)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_mesh)

    p = sub.add_parser("serve", help="serve a manipulation space over HTTP")
    p.add_argument("--reparam", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7878)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "export-mesh" and not args.reparam and not args.model:
        parser.error("export-mesh needs --model or --reparam")
    try:
        return args.func(args)
    except (DocumentError, ModelError, ProjectionError, DiscoveryError,
            ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
