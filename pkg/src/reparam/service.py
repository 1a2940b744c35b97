"""Stateless HTTP service exposing a manipulation space to interactive clients.

All slider state lives in the client; every /evaluate call is a pure function
of the request body.  Malformed bodies get 400, well-formed bodies that do not
fit the loaded space (wrong lengths, unknown names) get 422.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from reparam import csg, manipulation
from reparam.csg import TriangleMesh
from reparam.manipulation import ManipulationSpace, ManipulationState

MESH_SEGMENTS = 24


class EvalRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    weights: dict[str, float] = {}
    offsets: list[float] = []
    toggles: dict[str, bool] = {}


def _mesh_payload(mesh: TriangleMesh) -> dict:
    return {
        "vertices": [[float(v) for v in row] for row in mesh.vertices],
        "faces": [[int(i) for i in row] for row in mesh.faces],
        "ranges": [
            {
                "name": r.name,
                "primitive_index": r.primitive_index,
                "vertex_start": r.vertex_start,
                "vertex_count": r.vertex_count,
                "face_start": r.face_start,
                "face_count": r.face_count,
            }
            for r in mesh.ranges
        ],
    }


def build_app(space: ManipulationSpace) -> FastAPI:
    app = FastAPI(title="reparam service", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    label_index = {l: i for i, l in enumerate(space.labels)}
    group_names = space.group_names()
    group_index = {n: i for i, n in enumerate(group_names)}
    free_names = space.free_names()
    y0 = space.y0

    def _state_from(req: EvalRequest) -> ManipulationState:
        weights = np.zeros(len(space.labels))
        for label, value in req.weights.items():
            if label not in label_index:
                raise HTTPException(422, f"unknown variation label {label!r}")
            if not math.isfinite(value):
                raise HTTPException(422, f"weight {label!r} is not finite")
            weights[label_index[label]] = value
        if req.offsets:
            if len(req.offsets) != space.d_free:
                raise HTTPException(
                    422,
                    f"expected {space.d_free} offsets, got {len(req.offsets)}",
                )
            if not all(math.isfinite(v) for v in req.offsets):
                raise HTTPException(422, "offsets must be finite")
            offsets = np.asarray(req.offsets, dtype=float)
        else:
            offsets = np.zeros(space.d_free)
        toggles = [True] * len(space.groups)
        for name, on in req.toggles.items():
            if name not in group_index:
                raise HTTPException(422, f"unknown group {name!r}")
            toggles[group_index[name]] = bool(on)
        return ManipulationState(weights=weights, offsets=offsets, toggles=tuple(toggles))

    def _evaluate(state: ManipulationState) -> dict:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            x = manipulation.evaluate(space, state)
        visible = manipulation.visible_mask(space, state)
        mesh = csg.tessellate(space.model, x, segments=MESH_SEGMENTS, visible=visible)
        return {"x": [float(v) for v in x], "mesh": _mesh_payload(mesh)}

    @app.get("/space")
    async def get_space():
        return {
            "category": space.category,
            "d": space.model.d,
            "d_free": space.d_free,
            "variations": list(space.labels),
            "free": [
                {
                    "name": free_names[j],
                    "lo": float(space.lo[j]),
                    "hi": float(space.hi[j]),
                    "base": float(y0[j]),
                }
                for j in range(space.d_free)
            ],
            "groups": [
                {
                    "name": group_names[gi],
                    "members": [space.model.names[m] for m in g.members],
                    "absent_in": list(g.absent_in),
                    "default_on": True,
                }
                for gi, g in enumerate(space.groups)
            ],
        }

    @app.post("/evaluate")
    async def post_evaluate(req: EvalRequest):
        return _evaluate(_state_from(req))

    @app.get("/mesh/base")
    async def mesh_base():
        return _evaluate(manipulation.default_state(space))

    return app
