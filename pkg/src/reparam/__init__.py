"""Constraint discovery and slider-space re-parameterization for union CSG models."""

from reparam.csg import (
    Model,
    ModelError,
    Primitive,
    TriangleMesh,
    aabb,
    bbox_diagonal,
    contains,
    face_map,
    flatten,
    keypoints,
    tessellate,
    unflatten,
)

__version__ = "0.1.0"

__all__ = [
    "Model",
    "ModelError",
    "Primitive",
    "TriangleMesh",
    "aabb",
    "bbox_diagonal",
    "contains",
    "face_map",
    "flatten",
    "keypoints",
    "tessellate",
    "unflatten",
    "__version__",
]
