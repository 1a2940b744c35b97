"""Union-only CSG language: primitives, parameter vectors, meshes, proxy maps.

A model is an ordered list of axis-aligned primitives, each carrying a
translation and scale (plus a top-radius knob for tapered cylinders).  All
primitives are defined on an origin-centered unit-cube canonical domain and
instanced by scale-then-translate.  The full model flattens to a parameter
vector laid out per primitive as [tx, ty, tz, sx, sy, sz, (r_top)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CUBE = "cube"
CYLINDER_X = "cylinder_x"
CYLINDER_Y = "cylinder_y"
CYLINDER_Z = "cylinder_z"
CONE_CYLINDER_Y = "cone_cylinder_y"

KINDS = (CUBE, CYLINDER_X, CYLINDER_Y, CYLINDER_Z, CONE_CYLINDER_Y)
CYLINDER_KINDS = frozenset({CYLINDER_X, CYLINDER_Y, CYLINDER_Z, CONE_CYLINDER_Y})

# axis of rotational symmetry for the round primitives
KIND_AXIS = {CYLINDER_X: 0, CYLINDER_Y: 1, CYLINDER_Z: 2, CONE_CYLINDER_Y: 1}

AXIS_NAMES = ("x", "y", "z")

PARAM_SLOTS = ("tx", "ty", "tz", "sx", "sy", "sz")


class ModelError(ValueError):
    """Raised for structurally invalid primitives, models or parameter vectors."""


@dataclass(frozen=True)
class Primitive:
    kind: str
    name: str
    translation: tuple[float, float, float]
    scale: tuple[float, float, float]
    top_radius: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown primitive kind {self.kind!r}")
        if not self.name:
            raise ModelError("primitive needs a non-empty name")
        if len(self.translation) != 3 or len(self.scale) != 3:
            raise ModelError(f"{self.name}: translation and scale must be 3-vectors")
        if any(not (s > 0) for s in self.scale):
            raise ModelError(f"{self.name}: degenerate scale {self.scale}")
        if self.kind == CONE_CYLINDER_Y:
            if self.top_radius is None:
                raise ModelError(f"{self.name}: {CONE_CYLINDER_Y} requires top_radius")
            if not (0.0 <= self.top_radius <= 1.0):
                raise ModelError(f"{self.name}: top radius out of range [0, 1]")
        elif self.top_radius is not None:
            raise ModelError(f"{self.name}: top_radius only valid for {CONE_CYLINDER_Y}")

    @property
    def param_count(self) -> int:
        return 7 if self.kind == CONE_CYLINDER_Y else 6

    def params(self) -> np.ndarray:
        vals = list(self.translation) + list(self.scale)
        if self.kind == CONE_CYLINDER_Y:
            vals.append(self.top_radius)
        return np.asarray(vals, dtype=float)


@dataclass(frozen=True)
class Model:
    primitives: tuple[Primitive, ...]
    category: str = ""

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if not self.primitives:
            raise ModelError("model must contain at least one primitive")
        names = [p.name for p in self.primitives]
        if len(set(names)) != len(names):
            raise ModelError("primitive names must be unique")

    @property
    def d(self) -> int:
        return sum(p.param_count for p in self.primitives)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.primitives)

    def param_slices(self) -> list[slice]:
        out, at = [], 0
        for p in self.primitives:
            out.append(slice(at, at + p.param_count))
            at += p.param_count
        return out

    def param_names(self) -> list[str]:
        out = []
        for p in self.primitives:
            slots = PARAM_SLOTS + (("r_top",) if p.kind == CONE_CYLINDER_Y else ())
            out.extend(f"{p.name}.{s}" for s in slots)
        return out

    def scale_columns(self) -> list[int]:
        cols = []
        for p, sl in zip(self.primitives, self.param_slices()):
            cols.extend(range(sl.start + 3, sl.start + 6))
        return cols

    def top_radius_columns(self) -> list[int]:
        cols = []
        for p, sl in zip(self.primitives, self.param_slices()):
            if p.kind == CONE_CYLINDER_Y:
                cols.append(sl.start + 6)
        return cols

    def column(self, prim_index: int, slot: str) -> int:
        """Flat column index of one named parameter slot of one primitive."""
        sl = self.param_slices()[prim_index]
        p = self.primitives[prim_index]
        slots = PARAM_SLOTS + (("r_top",) if p.kind == CONE_CYLINDER_Y else ())
        if slot not in slots:
            raise ModelError(f"primitive {p.name!r} has no slot {slot!r}")
        return sl.start + slots.index(slot)


def flatten(model: Model) -> np.ndarray:
    return np.concatenate([p.params() for p in model.primitives])


def unflatten(model: Model, x: np.ndarray) -> Model:
    """Rebuild the model with parameters replaced by x (validates invariants)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise ModelError(f"parameter vector has dimension {x.shape}, expected ({model.d},)")
    prims = []
    for p, sl in zip(model.primitives, model.param_slices()):
        vals = x[sl]
        r_top = float(vals[6]) if p.kind == CONE_CYLINDER_Y else None
        prims.append(
            Primitive(
                kind=p.kind,
                name=p.name,
                translation=tuple(float(v) for v in vals[0:3]),
                scale=tuple(float(v) for v in vals[3:6]),
                top_radius=r_top,
            )
        )
    return Model(primitives=tuple(prims), category=model.category)


def params_valid(model: Model, x: np.ndarray) -> bool:
    try:
        unflatten(model, x)
        return True
    except ModelError:
        return False


# ---------------------------------------------------------------------------
# analytic bounding boxes

def primitive_aabbs(model: Model, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-primitive boxes t +- 0.5 s as (P,3) lo / hi arrays."""
    x = np.asarray(x, dtype=float)
    t = np.stack([x[sl][0:3] for sl in model.param_slices()])
    s = np.stack([x[sl][3:6] for sl in model.param_slices()])
    return t - 0.5 * s, t + 0.5 * s


def aabb(model: Model, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = primitive_aabbs(model, x)
    return lo.min(axis=0), hi.max(axis=0)


def bbox_diagonal(model: Model, x: np.ndarray) -> float:
    lo, hi = aabb(model, x)
    return float(np.linalg.norm(hi - lo))


def bbox_center(model: Model, x: np.ndarray) -> np.ndarray:
    lo, hi = aabb(model, x)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# point containment

def _contains_one(prim: Primitive, t: np.ndarray, s: np.ndarray, r_top: float | None,
                  pts: np.ndarray) -> np.ndarray:
    q = (pts - t) / s  # canonical coordinates
    if prim.kind == CUBE:
        return (np.abs(q) <= 0.5).all(axis=1)
    axis = KIND_AXIS[prim.kind]
    u, v = [a for a in range(3) if a != axis]
    in_slab = np.abs(q[:, axis]) <= 0.5
    r2 = q[:, u] ** 2 + q[:, v] ** 2
    if prim.kind == CONE_CYLINDER_Y:
        # radius tapers linearly from 0.5 at the bottom to 0.5*r_top at the top
        frac = q[:, axis] + 0.5
        rmax = 0.5 * ((1.0 - frac) + frac * r_top)
        return in_slab & (r2 <= rmax * rmax)
    return in_slab & (r2 <= 0.25)


def contains(model: Model, x: np.ndarray, p, visible=None):
    """Union containment test.  Accepts a single point (3,) or a batch (N,3)."""
    x = np.asarray(x, dtype=float)
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    inside = np.zeros(pts.shape[0], dtype=bool)
    for k, (prim, sl) in enumerate(zip(model.primitives, model.param_slices())):
        if visible is not None and not visible[k]:
            continue
        vals = x[sl]
        if vals[3:6].min() <= 0:
            continue  # degenerate primitive owns no volume
        r_top = float(vals[6]) if prim.kind == CONE_CYLINDER_Y else None
        inside |= _contains_one(prim, vals[0:3], vals[3:6], r_top, pts)
    return bool(inside[0]) if single else inside


# ---------------------------------------------------------------------------
# tessellation

@dataclass(frozen=True)
class MeshRange:
    """Triangle/vertex span of one primitive inside a TriangleMesh."""
    name: str
    primitive_index: int
    vertex_start: int
    vertex_count: int
    face_start: int
    face_count: int


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray     # (F, 3) int32
    ranges: tuple[MeshRange, ...] = ()

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


_CUBE_VERTS = np.array(
    [[sx, sy, sz] for sx in (-0.5, 0.5) for sy in (-0.5, 0.5) for sz in (-0.5, 0.5)]
)
# outward-facing, CCW seen from outside; vertex order bit pattern is (x, y, z)
_CUBE_FACES = np.array(
    [
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ],
    dtype=np.int32,
)


def _canonical_cylinder(axis: int, segments: int, top_radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Cylinder inscribed in the unit cube: radius 0.5, extent +-0.5 along axis."""
    ang = 2.0 * math.pi * np.arange(segments) / segments
    cos, sin = np.cos(ang), np.sin(ang)
    u, v = [a for a in range(3) if a != axis]

    def ring(height: float, radius: float) -> np.ndarray:
        pts = np.zeros((segments, 3))
        pts[:, axis] = height
        pts[:, u] = radius * cos
        pts[:, v] = radius * sin
        return pts

    bottom = ring(-0.5, 0.5)
    top = ring(0.5, 0.5 * top_radius)
    centers = np.zeros((2, 3))
    centers[0, axis] = -0.5
    centers[1, axis] = 0.5
    verts = np.vstack([bottom, top, centers])
    cb, ct = 2 * segments, 2 * segments + 1

    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        bi, bj, ti, tj = i, j, segments + i, segments + j
        faces.append([bi, bj, tj])
        faces.append([bi, tj, ti])
        faces.append([cb, bj, bi])   # bottom cap
        faces.append([ct, ti, tj])   # top cap
    faces = np.asarray(faces, dtype=np.int32)

    # flip windings so normals point outward for the chosen axis handedness
    n = np.cross(verts[faces[:, 1]] - verts[faces[:, 0]], verts[faces[:, 2]] - verts[faces[:, 0]])
    centroid = verts[faces].mean(axis=1)
    flip = (n * centroid).sum(axis=1) < 0
    faces[flip] = faces[flip][:, ::-1]
    return verts, faces


def _base_mesh(prim: Primitive, segments: int) -> tuple[np.ndarray, np.ndarray]:
    if prim.kind == CUBE:
        return _CUBE_VERTS.copy(), _CUBE_FACES.copy()
    axis = KIND_AXIS[prim.kind]
    r_top = prim.top_radius if prim.kind == CONE_CYLINDER_Y else 1.0
    return _canonical_cylinder(axis, segments, r_top)


def tessellate(model: Model, x: np.ndarray, segments: int = 24, visible=None) -> TriangleMesh:
    """Instance every (visible) primitive's base mesh by scale and translation.

    `segments` is the circumferential subdivision of round primitives; it is
    rounded up to a multiple of 4 so cylinder meshes touch their analytic
    bounding box exactly.
    """
    if segments < 8:
        raise ModelError("segments must be >= 8")
    segments = int(math.ceil(segments / 4) * 4)
    m = unflatten(model, x)  # validates x
    verts_parts, face_parts, ranges = [], [], []
    v_at = f_at = 0
    for k, prim in enumerate(m.primitives):
        if visible is not None and not visible[k]:
            continue
        bv, bf = _base_mesh(prim, segments)
        vv = bv * np.asarray(prim.scale) + np.asarray(prim.translation)
        verts_parts.append(vv)
        face_parts.append(bf + v_at)
        ranges.append(
            MeshRange(prim.name, k, v_at, len(vv), f_at, len(bf))
        )
        v_at += len(vv)
        f_at += len(bf)
    if not verts_parts:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32), ())
    return TriangleMesh(
        np.vstack(verts_parts), np.vstack(face_parts), tuple(ranges)
    )


def export_obj(mesh: TriangleMesh) -> str:
    """ASCII OBJ with one object per primitive."""
    lines = []
    for rng in mesh.ranges:
        lines.append(f"o {rng.name}")
        for v in mesh.vertices[rng.vertex_start:rng.vertex_start + rng.vertex_count]:
            lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for rng in mesh.ranges:
        lines.append(f"g {rng.name}")
        for f in mesh.faces[rng.face_start:rng.face_start + rng.face_count]:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# proxy-geometry linear maps

@dataclass(frozen=True)
class FaceMap:
    """Linear map from parameters to the 6P reduced face coordinates.

    Rows are ordered (primitive, axis x/y/z, sign -/+).  Row (p, axis, +)
    evaluates t_axis + 0.5 s_axis; the - row t_axis - 0.5 s_axis.  `weights`
    holds the face areas at the construction point (times pi/4 for round
    primitives).  `alg1_unsound` flags models whose primitives can change
    shape, where this proxy stops being a sound volume-change measure.
    """
    Q: np.ndarray         # (6P, d)
    weights: np.ndarray   # (6P,)
    primitive_count: int
    scale_cols: tuple[int, ...]
    top_radius_cols: tuple[int, ...]
    alg1_unsound: bool

    def row(self, prim_index: int, axis: int, sign: int) -> int:
        return prim_index * 6 + axis * 2 + (1 if sign > 0 else 0)


def face_map(model: Model, x0: np.ndarray | None = None) -> FaceMap:
    """Build the face-coordinate map, with weights frozen at x0."""
    if x0 is None:
        x0 = flatten(model)
    P = len(model.primitives)
    d = model.d
    Q = np.zeros((6 * P, d))
    a = np.zeros(6 * P)
    for k, (prim, sl) in enumerate(zip(model.primitives, model.param_slices())):
        scale0 = np.asarray(x0[sl][3:6], dtype=float)
        ratio = math.pi / 4.0 if prim.kind in CYLINDER_KINDS else 1.0
        for axis in range(3):
            others = [o for o in range(3) if o != axis]
            area = float(scale0[others[0]] * scale0[others[1]]) * ratio
            for si, sgn in enumerate((-1.0, 1.0)):
                r = k * 6 + axis * 2 + si
                Q[r, sl.start + axis] = 1.0
                Q[r, sl.start + 3 + axis] = 0.5 * sgn
                a[r] = area
    return FaceMap(
        Q=Q,
        weights=a,
        primitive_count=P,
        scale_cols=tuple(model.scale_columns()),
        top_radius_cols=tuple(model.top_radius_columns()),
        alg1_unsound=any(p.kind == CONE_CYLINDER_Y for p in model.primitives),
    )


CORNER_SIGNS = tuple(
    (sx, sy, sz) for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
)


@dataclass(frozen=True)
class Keypoint:
    primitive_index: int
    point_id: str       # "center" or "corner_<+->x<+->y<+->z" pattern
    rows: np.ndarray    # (3, d) linear map: position = rows @ x

    def position(self, x: np.ndarray) -> np.ndarray:
        return self.rows @ np.asarray(x, dtype=float)


def keypoints(model: Model) -> list[Keypoint]:
    """9 keypoints per primitive: the 8 bounding-box corners plus the center."""
    d = model.d
    out = []
    for k, sl in enumerate(model.param_slices()):
        center = np.zeros((3, d))
        for axis in range(3):
            center[axis, sl.start + axis] = 1.0
        out.append(Keypoint(k, "center", center))
        for signs in CORNER_SIGNS:
            rows = np.zeros((3, d))
            for axis in range(3):
                rows[axis, sl.start + axis] = 1.0
                rows[axis, sl.start + 3 + axis] = 0.5 * signs[axis]
            tag = "".join("p" if s > 0 else "m" for s in signs)
            out.append(Keypoint(k, f"corner_{tag}", rows))
    return out
