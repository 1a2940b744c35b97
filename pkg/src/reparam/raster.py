"""CPU z-buffer rasterizer and the image-space loss machinery.

Renders are deterministic grayscale images: flat Lambertian shading under one
fixed directional light, background 0, no anti-aliasing.  Cameras are sampled
in model-relative terms (distance in multiples of the bounding-box diagonal)
and anchored against a concrete model before any loss is computed, so a whole
optimization run sees one fixed set of poses.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from reparam import csg
from reparam.csg import Model

DEFAULT_FOV = math.radians(40.0)
DEFAULT_DISTANCE = 2.2  # multiples of the bbox diagonal
_LIGHT = np.array([0.40, 0.85, 0.30])
_LIGHT = _LIGHT / np.linalg.norm(_LIGHT)
_AMBIENT = 0.15


@dataclass(frozen=True)
class Camera:
    azimuth: float
    elevation: float
    distance: float                      # bbox-diagonal multiples until anchored
    fov: float = DEFAULT_FOV
    look_at: tuple[float, float, float] | None = None
    anchored: bool = False

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("camera distance must be positive")
        if not (0 < self.fov < math.pi):
            raise ValueError("fov out of range (0, pi)")
        if not abs(self.elevation) < math.pi / 2:
            raise ValueError("elevation out of range (-pi/2, pi/2)")

    def anchor(self, model: Model, x: np.ndarray) -> Camera:
        """Fix the pose in world units against the model at x."""
        if self.anchored:
            return self
        center = csg.bbox_center(model, x)
        diag = csg.bbox_diagonal(model, x)
        return replace(
            self,
            distance=self.distance * diag,
            look_at=(float(center[0]), float(center[1]), float(center[2])),
            anchored=True,
        )

    def eye(self) -> np.ndarray:
        if not self.anchored:
            raise ValueError("camera not anchored")
        direction = np.array(
            [
                math.cos(self.elevation) * math.cos(self.azimuth),
                math.sin(self.elevation),
                math.cos(self.elevation) * math.sin(self.azimuth),
            ]
        )
        return np.asarray(self.look_at) + self.distance * direction


@dataclass(frozen=True)
class RenderTarget:
    camera: Camera
    image: np.ndarray  # (size, size) float in [0,1]


def sample_cameras(seed: int, n: int = 5) -> list[Camera]:
    """Deterministic random poses: azimuth uniform on [0,2pi), elevation on [10deg,40deg]."""
    if n < 1:
        raise ValueError("need at least one camera")
    rng = np.random.default_rng(seed)
    azimuths = rng.uniform(0.0, 2.0 * math.pi, n)
    elevations = rng.uniform(math.radians(10.0), math.radians(40.0), n)
    return [
        Camera(azimuth=float(a), elevation=float(e), distance=DEFAULT_DISTANCE)
        for a, e in zip(azimuths, elevations)
    ]


def render(model: Model, x: np.ndarray, cam: Camera, size: int = 256,
           visible=None, segments: int = 24) -> np.ndarray:
    if size < 32:
        raise ValueError("render size must be >= 32")
    cam = cam.anchor(model, x)
    mesh = csg.tessellate(model, x, segments=segments, visible=visible)
    img = np.zeros((size, size))
    if len(mesh.faces) == 0:
        return img

    eye = cam.eye()
    fwd = np.asarray(cam.look_at) - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
    nr = np.linalg.norm(right)
    if nr < 1e-12:  # looking straight up or down; any horizontal right works
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / nr
    up = np.cross(right, fwd)

    rel = mesh.vertices - eye
    vx = rel @ right
    vy = rel @ up
    vz = rel @ fwd
    focal = 1.0 / math.tan(cam.fov / 2.0)

    tri = mesh.faces
    # world-space face normals for shading
    e1 = mesh.vertices[tri[:, 1]] - mesh.vertices[tri[:, 0]]
    e2 = mesh.vertices[tri[:, 2]] - mesh.vertices[tri[:, 0]]
    nrm = np.cross(e1, e2)
    nlen = np.linalg.norm(nrm, axis=1)
    nlen[nlen == 0] = 1.0
    shade = _AMBIENT + (1.0 - _AMBIENT) * np.abs((nrm / nlen[:, None]) @ _LIGHT)

    # drop triangles touching or behind the eye plane
    zok = vz[tri].min(axis=1) > 1e-9
    if not zok.any():
        return img

    sx = (focal * vx / vz * 0.5 + 0.5) * size
    sy = (0.5 - focal * vy / vz * 0.5) * size
    inv_z = 1.0 / vz

    zbuf = np.full((size, size), -np.inf)
    for t in np.nonzero(zok)[0]:
        i0, i1, i2 = tri[t]
        x0, y0, x1, y1, x2, y2 = sx[i0], sy[i0], sx[i1], sy[i1], sx[i2], sy[i2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area >= -1e-12:
            continue  # backfacing or degenerate in screen space
        xmin = max(int(math.floor(min(x0, x1, x2))), 0)
        xmax = min(int(math.ceil(max(x0, x1, x2))), size - 1)
        ymin = max(int(math.floor(min(y0, y1, y2))), 0)
        ymax = min(int(math.ceil(max(y0, y1, y2))), size - 1)
        if xmin > xmax or ymin > ymax:
            continue
        px = np.arange(xmin, xmax + 1) + 0.5
        py = np.arange(ymin, ymax + 1) + 0.5
        PX, PY = np.meshgrid(px, py)
        w0 = (x2 - x1) * (PY - y1) - (y2 - y1) * (PX - x1)
        w1 = (x0 - x2) * (PY - y2) - (y0 - y2) * (PX - x2)
        w2 = (x1 - x0) * (PY - y0) - (y1 - y0) * (PX - x0)
        cover = (w0 <= 0) & (w1 <= 0) & (w2 <= 0)
        if not cover.any():
            continue
        l0, l1, l2 = w0 / area, w1 / area, w2 / area
        depth = l0 * inv_z[i0] + l1 * inv_z[i1] + l2 * inv_z[i2]
        zwin = zbuf[ymin:ymax + 1, xmin:xmax + 1]
        iwin = img[ymin:ymax + 1, xmin:xmax + 1]
        upd = cover & (depth > zwin)
        zwin[upd] = depth[upd]
        iwin[upd] = shade[t]
    return img


def sharpen(img: np.ndarray) -> np.ndarray:
    """I - 0.2 * blur(I) with a 3x3 box blur, edges clamped."""
    img = np.asarray(img, dtype=float)
    p = np.pad(img, 1, mode="edge")
    blur = (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    ) / 9.0
    return img - 0.2 * blur


def pixel_loss(model: Model, x: np.ndarray, x0: np.ndarray,
               targets: list[RenderTarget], lam: float = 0.001) -> float:
    """Sharpened image difference summed over targets plus lambda * ||x - x0||^2.

    Each image term is averaged over pixels so the magnitude does not depend
    on render resolution.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    dx = x - x0
    total = lam * float(dx @ dx)
    for t in targets:
        if not t.camera.anchored:
            raise ValueError("pixel_loss requires anchored cameras")
        h, w = t.image.shape
        if h != w:
            raise ValueError(f"target image must be square, got {w}x{h}")
        img = render(model, x, t.camera, h)
        diff = sharpen(img) - sharpen(t.image)
        total += float(np.mean(diff * diff))
    return total


def render_targets(model: Model, x: np.ndarray, cameras: list[Camera],
                   size: int = 256) -> list[RenderTarget]:
    """Anchor the cameras against (model, x) and self-render one target each."""
    out = []
    for cam in cameras:
        a = cam.anchor(model, x)
        out.append(RenderTarget(camera=a, image=render(model, x, a, size)))
    return out


# ---------------------------------------------------------------------------
# 8-bit grayscale PNG io and on-disk target packs

def save_png(img: np.ndarray, path: str) -> None:
    from PIL import Image as PILImage

    q = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    PILImage.fromarray(np.round(q * 255.0).astype(np.uint8), mode="L").save(path)


def load_png(path: str) -> np.ndarray:
    from PIL import Image as PILImage

    with PILImage.open(path) as im:
        return np.asarray(im.convert("L"), dtype=float) / 255.0


def _camera_dict(cam: Camera) -> dict:
    if not cam.anchored:
        raise ValueError("only anchored cameras can be saved")
    return {
        "azimuth": float(cam.azimuth),
        "elevation": float(cam.elevation),
        "distance": float(cam.distance),
        "fov": float(cam.fov),
        "look_at": [float(v) for v in cam.look_at],
    }


def _camera_from_dict(d: dict) -> Camera:
    return Camera(
        azimuth=float(d["azimuth"]),
        elevation=float(d["elevation"]),
        distance=float(d["distance"]),
        fov=float(d["fov"]),
        look_at=tuple(float(v) for v in d["look_at"]),
        anchored=True,
    )


def save_targets(targets: list[RenderTarget], out_dir: str) -> None:
    """Write a target pack: numbered PNGs plus a targets.json manifest."""
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for i, t in enumerate(targets):
        name = f"cam{i:02d}.png"
        save_png(t.image, os.path.join(out_dir, name))
        names.append(name)
    manifest = {
        "format": "targets@1",
        "size": int(targets[0].image.shape[0]) if targets else 0,
        "cameras": [_camera_dict(t.camera) for t in targets],
        "images": names,
    }
    with open(os.path.join(out_dir, "targets.json"), "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")


def load_targets(in_dir: str) -> list[RenderTarget]:
    with open(os.path.join(in_dir, "targets.json")) as f:
        manifest = json.load(f)
    if manifest.get("format") != "targets@1":
        raise ValueError("not a target pack (bad format field)")
    out = []
    for cd, name in zip(manifest["cameras"], manifest["images"]):
        out.append(
            RenderTarget(
                camera=_camera_from_dict(cd),
                image=load_png(os.path.join(in_dir, name)),
            )
        )
    return out
