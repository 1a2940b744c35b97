"""On-disk document formats: models, variation sets, spaces, traces, pools.

Documents are canonical JSON with a fixed field order, so save(load(save(x)))
is byte-identical and content hashes are stable.  Parsing is strict: unknown
fields are rejected and errors name the offending field.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from reparam import numeric
from reparam.constraints import ConstraintRow, SemanticConstraint, rows_of
from reparam.csg import CONE_CYLINDER_Y, Model, ModelError, Primitive, flatten
from reparam.discovery import (
    DiscreteGroup,
    DiscreteGroups,
    GreedyTrace,
    VariationSet,
)
from reparam.manipulation import ManipulationSpace

MODEL_FORMAT = "csg-model@1"
VARIATIONS_FORMAT = "variations@1"
REPARAM_FORMAT = "reparam@1"
TRACE_FORMAT = "trace@1"
POOL_FORMAT = "pool@1"


class DocumentError(ValueError):
    pass


def canonical_text(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def content_hash(text) -> str:
    if isinstance(text, str):
        text = text.encode("utf-8")
    return hashlib.sha256(text).hexdigest()


def _write(doc: dict, path: str) -> str:
    text = canonical_text(doc)
    with open(path, "w") as f:
        f.write(text)
    return content_hash(text)


def _read(path: str, expect_format: str) -> dict:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise DocumentError(f"{os.path.basename(path)}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise DocumentError(f"{os.path.basename(path)}: document must be an object")
    got = doc.get("format")
    if got != expect_format:
        raise DocumentError(
            f"{os.path.basename(path)}: format is {got!r}, expected {expect_format!r}"
        )
    return doc


# ---------------------------------------------------------------------------
# strict field access

def _check_keys(d: dict, ctx: str, required: tuple[str, ...], optional: tuple[str, ...] = ()):
    for k in d:
        if k not in required and k not in optional:
            raise DocumentError(f"{ctx}: unknown field {k!r}")
    for k in required:
        if k not in d:
            raise DocumentError(f"{ctx}: missing field {k!r}")


def _num(v, ctx: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DocumentError(f"{ctx}: expected a number, got {type(v).__name__}")
    return float(v)


def _int(v, ctx: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise DocumentError(f"{ctx}: expected an integer, got {type(v).__name__}")
    return v


def _str(v, ctx: str) -> str:
    if not isinstance(v, str):
        raise DocumentError(f"{ctx}: expected a string, got {type(v).__name__}")
    return v


def _vec(v, n, ctx: str) -> list[float]:
    if not isinstance(v, list) or (n is not None and len(v) != n):
        raise DocumentError(f"{ctx}: expected a list of {n} numbers")
    return [_num(e, f"{ctx}[{i}]") for i, e in enumerate(v)]


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=float)]


# ---------------------------------------------------------------------------
# model documents

def model_document(model: Model) -> dict:
    prims = []
    for p in model.primitives:
        d = {
            "kind": p.kind,
            "name": p.name,
            "translation": _floats(p.translation),
            "scale": _floats(p.scale),
        }
        if p.kind == CONE_CYLINDER_Y:
            d["top_radius"] = float(p.top_radius)
        prims.append(d)
    return {"format": MODEL_FORMAT, "category": model.category, "primitives": prims}


def parse_model(doc: dict) -> Model:
    _check_keys(doc, "model", ("format", "category", "primitives"))
    category = _str(doc["category"], "category")
    raw = doc["primitives"]
    if not isinstance(raw, list):
        raise DocumentError("primitives: expected a list")
    prims = []
    for i, pd in enumerate(raw):
        ctx = f"primitives[{i}]"
        if not isinstance(pd, dict):
            raise DocumentError(f"{ctx}: expected an object")
        _check_keys(pd, ctx, ("kind", "name", "translation", "scale"), ("top_radius",))
        kind = _str(pd["kind"], f"{ctx}.kind")
        top = pd.get("top_radius")
        try:
            prims.append(
                Primitive(
                    kind=kind,
                    name=_str(pd["name"], f"{ctx}.name"),
                    translation=tuple(_vec(pd["translation"], 3, f"{ctx}.translation")),
                    scale=tuple(_vec(pd["scale"], 3, f"{ctx}.scale")),
                    top_radius=_num(top, f"{ctx}.top_radius") if top is not None else None,
                )
            )
        except ModelError as e:
            raise DocumentError(f"{ctx}: {e}") from e
    try:
        return Model(primitives=tuple(prims), category=category)
    except ModelError as e:
        raise DocumentError(str(e)) from e


def save_model(model: Model, path: str) -> str:
    return _write(model_document(model), path)


def load_model(path: str) -> Model:
    return parse_model(_read(path, MODEL_FORMAT))


def model_hash(model: Model) -> str:
    return content_hash(canonical_text(model_document(model)))


# ---------------------------------------------------------------------------
# constraint blocks (shared by pool, variations ground truth, reparam, trace)

def _constraint_dict(sc: SemanticConstraint) -> dict:
    return {
        "kind": sc.kind,
        "label": sc.label,
        "participants": [list(p) if isinstance(p, tuple) else p for p in sc.participants],
        "rows": [_floats(r.c) for r in sc.rows],
    }


def _parse_constraint(cd: dict, d: int, ctx: str) -> SemanticConstraint:
    if not isinstance(cd, dict):
        raise DocumentError(f"{ctx}: expected an object")
    _check_keys(cd, ctx, ("kind", "label", "participants", "rows"))
    rows = cd["rows"]
    if not isinstance(rows, list) or not rows:
        raise DocumentError(f"{ctx}.rows: expected a non-empty list")
    parts = cd["participants"]
    if not isinstance(parts, list):
        raise DocumentError(f"{ctx}.participants: expected a list")
    try:
        return SemanticConstraint(
            kind=_str(cd["kind"], f"{ctx}.kind"),
            rows=tuple(
                ConstraintRow(np.asarray(_vec(r, d, f"{ctx}.rows[{i}]")))
                for i, r in enumerate(rows)
            ),
            participants=tuple(tuple(p) if isinstance(p, list) else p for p in parts),
            label=_str(cd["label"], f"{ctx}.label"),
        )
    except ValueError as e:
        raise DocumentError(f"{ctx}: {e}") from e


# ---------------------------------------------------------------------------
# candidate pool documents

def pool_document(pool, base_hash: str) -> dict:
    return {
        "format": POOL_FORMAT,
        "base_model": base_hash,
        "eps_rel": float(pool.eps_rel),
        "eps_abs": float(pool.eps_abs),
        "constraints": [_constraint_dict(sc) for sc in pool],
    }


# ---------------------------------------------------------------------------
# variation documents

PROVENANCES = ("external-generator", "synthetic", "manual")


def variations_document(variations: VariationSet, base_hash: str,
                        provenance: str, ground_truth: dict | None = None) -> dict:
    if provenance not in PROVENANCES:
        raise DocumentError(f"provenance must be one of {PROVENANCES}")
    doc = {
        "format": VARIATIONS_FORMAT,
        "base_model": base_hash,
        "provenance": provenance,
        "variations": [{"label": l, "x": _floats(v)} for l, v in variations.items],
    }
    if ground_truth is not None:
        doc["ground_truth"] = ground_truth
    return doc


def save_variations(variations: VariationSet, base_hash: str, provenance: str,
                    path: str, ground_truth: dict | None = None) -> str:
    return _write(variations_document(variations, base_hash, provenance, ground_truth), path)


def load_variations(path: str, model: Model) -> tuple[VariationSet, dict]:
    """Parse a variation document against its base model; verifies the hash."""
    doc = _read(path, VARIATIONS_FORMAT)
    _check_keys(
        doc, "variations document",
        ("format", "base_model", "provenance", "variations"),
        ("ground_truth",),
    )
    want = _str(doc["base_model"], "base_model")
    have = model_hash(model)
    if want != have:
        raise DocumentError(
            f"variation document references model {want[:12]}..., "
            f"but the supplied model hashes to {have[:12]}..."
        )
    if doc["provenance"] not in PROVENANCES:
        raise DocumentError(f"provenance: must be one of {PROVENANCES}")
    raw = doc["variations"]
    if not isinstance(raw, list) or not raw:
        raise DocumentError("variations: expected a non-empty list")
    d = model.d
    items = []
    for i, vd in enumerate(raw):
        ctx = f"variations[{i}]"
        if not isinstance(vd, dict):
            raise DocumentError(f"{ctx}: expected an object")
        _check_keys(vd, ctx, ("label", "x"))
        items.append(
            (_str(vd["label"], f"{ctx}.label"), np.asarray(_vec(vd["x"], d, f"{ctx}.x")))
        )
    try:
        vs = VariationSet(x0=flatten(model), items=tuple(items))
    except ValueError as e:
        raise DocumentError(str(e)) from e
    return vs, doc


def ground_truth_block(constraints, indices, sigma: float, seed: int,
                       rank: int, d_free: int) -> dict:
    return {
        "constraint_indices": [int(i) for i in indices],
        "constraints": [_constraint_dict(sc) for sc in constraints],
        "rank": int(rank),
        "d_free": int(d_free),
        "sigma": float(sigma),
        "seed": int(seed),
    }


def parse_ground_truth(doc: dict, d: int) -> dict:
    gt = doc.get("ground_truth")
    if gt is None:
        raise DocumentError("variation document carries no ground truth block")
    _check_keys(
        gt, "ground_truth",
        ("constraint_indices", "constraints", "rank", "d_free", "sigma", "seed"),
    )
    return {
        "constraint_indices": [_int(i, "ground_truth.constraint_indices") for i in gt["constraint_indices"]],
        "constraints": [
            _parse_constraint(cd, d, f"ground_truth.constraints[{i}]")
            for i, cd in enumerate(gt["constraints"])
        ],
        "rank": _int(gt["rank"], "ground_truth.rank"),
        "d_free": _int(gt["d_free"], "ground_truth.d_free"),
        "sigma": _num(gt["sigma"], "ground_truth.sigma"),
        "seed": _int(gt["seed"], "ground_truth.seed"),
    }


# ---------------------------------------------------------------------------
# re-parameterized space documents

def reparam_document(space: ManipulationSpace) -> dict:
    names = space.model.names
    return {
        "format": REPARAM_FORMAT,
        "category": space.category,
        "model": model_document(space.model),
        "constraints": [_constraint_dict(sc) for sc in space.constraint_set],
        "x0": _floats(space.x0),
        "x0_hat": _floats(space.x0_hat),
        "variations": [
            {"label": l, "delta": _floats(space.deltas[i])}
            for i, l in enumerate(space.labels)
        ],
        "free_cols": [int(c) for c in space.subspace.free_cols],
        "bounds": {"lo": _floats(space.lo), "hi": _floats(space.hi)},
        "groups": [
            {
                "members": [names[m] for m in g.members],
                "absent_in": list(g.absent_in),
                "default_on": True,
            }
            for g in space.groups
        ],
    }


def save_reparam(space: ManipulationSpace, path: str) -> str:
    return _write(reparam_document(space), path)


def load_reparam(path: str) -> ManipulationSpace:
    doc = _read(path, REPARAM_FORMAT)
    _check_keys(
        doc, "reparam document",
        ("format", "category", "model", "constraints", "x0", "x0_hat",
         "variations", "free_cols", "bounds", "groups"),
    )
    model = parse_model(doc["model"])
    d = model.d
    cset = tuple(
        _parse_constraint(cd, d, f"constraints[{i}]")
        for i, cd in enumerate(doc["constraints"])
    )
    C = rows_of(cset) if cset else np.zeros((0, d))
    sub = numeric.nullspace(C)
    stored_free = [_int(c, "free_cols") for c in doc["free_cols"]]
    if tuple(stored_free) != sub.free_cols:
        raise DocumentError("free_cols do not match the constraint matrix null space")
    x0 = np.asarray(_vec(doc["x0"], d, "x0"))
    x0_hat = np.asarray(_vec(doc["x0_hat"], d, "x0_hat"))
    labels, deltas = [], []
    for i, vd in enumerate(doc["variations"]):
        ctx = f"variations[{i}]"
        _check_keys(vd, ctx, ("label", "delta"))
        labels.append(_str(vd["label"], f"{ctx}.label"))
        deltas.append(_vec(vd["delta"], d, f"{ctx}.delta"))
    bounds = doc["bounds"]
    _check_keys(bounds, "bounds", ("lo", "hi"))
    lo = np.asarray(_vec(bounds["lo"], sub.d_free, "bounds.lo"))
    hi = np.asarray(_vec(bounds["hi"], sub.d_free, "bounds.hi"))
    name_to_idx = {n: i for i, n in enumerate(model.names)}
    groups = []
    for i, gd in enumerate(doc["groups"]):
        ctx = f"groups[{i}]"
        _check_keys(gd, ctx, ("members", "absent_in", "default_on"))
        try:
            members = tuple(sorted(name_to_idx[_str(m, f"{ctx}.members")] for m in gd["members"]))
        except KeyError as e:
            raise DocumentError(f"{ctx}.members: unknown primitive {e.args[0]!r}") from e
        groups.append(
            DiscreteGroup(
                members=members,
                absent_in=tuple(_str(a, f"{ctx}.absent_in") for a in gd["absent_in"]),
            )
        )
    return ManipulationSpace(
        model=model,
        subspace=sub,
        x0=x0,
        x0_hat=x0_hat,
        labels=tuple(labels),
        deltas=np.asarray(deltas, dtype=float) if deltas else np.zeros((0, d)),
        lo=lo,
        hi=hi,
        groups=DiscreteGroups(groups=tuple(groups)),
        constraint_set=cset,
        category=_str(doc["category"], "category"),
    )


# ---------------------------------------------------------------------------
# greedy trace documents

def trace_document(trace: GreedyTrace, base_hash: str) -> dict:
    return {
        "format": TRACE_FORMAT,
        "base_model": base_hash,
        "picks": [
            {"constraint": _constraint_dict(p.constraint), "score": float(p.score)}
            for p in trace.picks
        ],
        "pixel_curve": [float(v) for v in trace.pixel_curve],
        "cutoff": int(trace.cutoff_index),
        "deferred": [
            {"constraint": _constraint_dict(sc), "round": int(r)}
            for sc, r in trace.deferred
        ],
    }


def save_trace(trace: GreedyTrace, base_hash: str, path: str) -> str:
    return _write(trace_document(trace, base_hash), path)


def load_trace(path: str, model: Model) -> GreedyTrace:
    doc = _read(path, TRACE_FORMAT)
    _check_keys(doc, "trace", ("format", "base_model", "picks", "pixel_curve", "cutoff", "deferred"))
    if _str(doc["base_model"], "base_model") != model_hash(model):
        raise DocumentError("trace references a different model")
    d = model.d
    from reparam.discovery import GreedyPick  # local to avoid cycle at import time

    picks = []
    for i, pd in enumerate(doc["picks"]):
        ctx = f"picks[{i}]"
        _check_keys(pd, ctx, ("constraint", "score"))
        picks.append(
            GreedyPick(
                constraint=_parse_constraint(pd["constraint"], d, ctx),
                score=_num(pd["score"], f"{ctx}.score"),
            )
        )
    deferred = []
    for i, dd in enumerate(doc["deferred"]):
        ctx = f"deferred[{i}]"
        _check_keys(dd, ctx, ("constraint", "round"))
        deferred.append(
            (_parse_constraint(dd["constraint"], d, ctx), _int(dd["round"], f"{ctx}.round"))
        )
    return GreedyTrace(
        picks=tuple(picks),
        pixel_curve=tuple(_num(v, "pixel_curve") for v in doc["pixel_curve"]),
        cutoff_index=_int(doc["cutoff"], "cutoff"),
        deferred=tuple(deferred),
    )


def trace_table(trace: GreedyTrace) -> str:
    """Plain-text distortion table, one pick per line."""
    lines = ["index  volumetric    pixel         kept  label"]
    for i, p in enumerate(trace.picks):
        px = trace.pixel_curve[i] if i < len(trace.pixel_curve) else float("nan")
        kept = "yes" if i < trace.cutoff_index else "no"
        lines.append(
            f"{i + 1:5d}  {p.score:<12.6g}  {px:<12.6g}  {kept:<4s}  {p.constraint.label}"
        )
    return "\n".join(lines) + "\n"


def chosen_constraints(trace: GreedyTrace) -> tuple[SemanticConstraint, ...]:
    kept = [p.constraint for p in trace.picks[: trace.cutoff_index]]
    kept += [sc for sc, rnd in trace.deferred if rnd <= trace.cutoff_index]
    return tuple(kept)
