"""Cameras, rays, point clouds, boxes and triangle meshes.

Conventions used everywhere in the package:

* world frame is z-up, units are meters;
* cameras are stored world-from-camera, camera axes are x right, y down,
  z forward (pinhole, no distortion);
* the center of pixel ``(i, j)`` sits at continuous coordinate ``(i + 0.5, j + 0.5)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_ORTHO_TOL = 1e-6


def _as_vec3(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {np.shape(x)}")
    return arr


@dataclass(frozen=True)
class CameraModel:
    image_width: int
    image_height: int
    focal_x: float
    focal_y: float
    principal_x: float
    principal_y: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=_ORTHO_TOL) or abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation must be orthonormal with determinant +1")
        if self.focal_x <= 0 or self.focal_y <= 0:
            raise ValueError("focal lengths must be positive")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image size must be positive")
        if not (0 <= self.principal_x <= self.image_width and 0 <= self.principal_y <= self.image_height):
            raise ValueError("principal point must lie inside the image")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", _as_vec3(self.translation, "translation"))

    @classmethod
    def look_at(cls, eye, target, width: int, height: int, fov_deg: float, up=(0.0, 0.0, 1.0)) -> "CameraModel":
        """Pinhole camera at ``eye`` aimed at ``target``; ``fov_deg`` is the horizontal field of view."""
        eye = _as_vec3(eye, "eye")
        forward = _as_vec3(target, "target") - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, _as_vec3(up, "up"))
        if np.linalg.norm(right) < 1e-9:
            raise ValueError("view direction is parallel to the up vector")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        focal = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
        return cls(width, height, focal, focal, width / 2, height / 2,
                   np.stack([right, down, forward], axis=1), eye)

    @property
    def center(self) -> np.ndarray:
        return self.translation

    def pixel_rays(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized back-projection of continuous pixel coordinates to (origins, unit directions)."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        local = np.stack([(u - self.principal_x) / self.focal_x,
                          (v - self.principal_y) / self.focal_y,
                          np.ones_like(u)], axis=-1)
        dirs = local @ self.rotation.T
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        origins = np.broadcast_to(self.translation, dirs.shape).copy()
        return origins, dirs

    def project(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Project world points; returns ``(uv, valid)`` where valid means in front and inside the frame."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        cam = (pts - self.translation) @ self.rotation
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.focal_x * cam[:, 0] / z + self.principal_x
            v = self.focal_y * cam[:, 1] / z + self.principal_y
        valid = (z > 0) & (u >= 0) & (u < self.image_width) & (v >= 0) & (v < self.image_height)
        return np.stack([u, v], axis=-1), valid

    def to_dict(self) -> dict:
        return {
            "image_width": int(self.image_width),
            "image_height": int(self.image_height),
            "focal_x": float(self.focal_x),
            "focal_y": float(self.focal_y),
            "principal_x": float(self.principal_x),
            "principal_y": float(self.principal_y),
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(int(d["image_width"]), int(d["image_height"]), float(d["focal_x"]), float(d["focal_y"]),
                   float(d["principal_x"]), float(d["principal_y"]),
                   np.array(d["rotation"], dtype=np.float64), np.array(d["translation"], dtype=np.float64))

    def __eq__(self, other):
        if not isinstance(other, CameraModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        d = _as_vec3(self.direction, "direction")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        object.__setattr__(self, "origin", _as_vec3(self.origin, "origin"))
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    intensity: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.intensity is not None:
            inten = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError("intensity length must match point count")
            if (inten < 0).any():
                raise ValueError("intensity must be non-negative")
            object.__setattr__(self, "intensity", inten)

    def __len__(self) -> int:
        return self.points.shape[0]

    def transformed(self, rotation, translation) -> "PointCloud":
        return PointCloud(self.points @ np.asarray(rotation).T + np.asarray(translation), self.intensity)


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo, hi = _as_vec3(self.min, "min"), _as_vec3(self.max, "max")
        if (lo > hi).any():
            raise ValueError(f"invalid box: min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def cube(cls, half: float = 1.0) -> "Aabb":
        return cls(np.full(3, -half), np.full(3, half))

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points)
        return np.all((pts >= self.min) & (pts <= self.max), axis=-1)

    def expanded(self, fraction) -> "Aabb":
        pad = np.asarray(fraction, dtype=np.float64) * self.extent
        return Aabb(self.min - pad, self.max + pad)


def generate_ray(camera: CameraModel, pixel) -> Ray:
    u, v = map(float, pixel)
    if not (0 <= u < camera.image_width and 0 <= v < camera.image_height):
        raise ValueError(f"pixel ({u}, {v}) outside {camera.image_width}x{camera.image_height} image")
    origins, dirs = camera.pixel_rays(u, v)
    return Ray(origins, dirs)


def project_point(camera: CameraModel, x) -> Optional[tuple[float, float]]:
    uv, valid = camera.project(x)
    if not valid[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])


def intersect_aabb_batch(origins, directions, lo, hi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slab test for many rays. Returns ``(t_near, t_far, hit)``; t_near is clamped to 0."""
    o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    parallel = d == 0
    safe_d = np.where(parallel, 1.0, d)
    with np.errstate(over="ignore"):
        t0 = (lo - o) / safe_d
        t1 = (hi - o) / safe_d
    t_lo = np.minimum(t0, t1)
    t_hi = np.maximum(t0, t1)
    # parallel axes: unbounded if the origin is inside the slab, empty otherwise
    inside = (o >= lo) & (o <= hi)
    t_lo = np.where(parallel, np.where(inside, -np.inf, np.inf), t_lo)
    t_hi = np.where(parallel, np.where(inside, np.inf, -np.inf), t_hi)
    t_near = np.maximum(t_lo.max(axis=1), 0.0)
    t_far = t_hi.min(axis=1)
    hit = (t_far > 0) & (t_far > t_near)
    return t_near, t_far, hit


def intersect_aabb(ray: Ray, box: Aabb) -> Optional[tuple[float, float]]:
    t_near, t_far, hit = intersect_aabb_batch(ray.origin, ray.direction, box.min, box.max)
    if not hit[0]:
        return None
    return float(t_near[0]), float(t_far[0])


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray
    face_colors: Optional[np.ndarray] = None

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise ValueError("face index out of range")
        if ((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])).any():
            raise ValueError("degenerate face with repeated vertex index")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)
        if self.face_colors is not None:
            colors = np.asarray(self.face_colors, dtype=np.float64).reshape(-1, 3)
            if colors.shape[0] != faces.shape[0]:
                raise ValueError("one color per face required")
            if (colors < 0).any() or (colors > 1).any():
                raise ValueError("face colors must lie in [0, 1]")
            object.__setattr__(self, "face_colors", colors)

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def face_normals(self) -> np.ndarray:
        tri = self.triangles()
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def volume(self) -> float:
        """Signed volume by summing origin-apex tetrahedra (closed, outward-oriented meshes)."""
        tri = self.triangles()
        return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)

    def bounds(self) -> Aabb:
        return Aabb(self.vertices.min(axis=0), self.vertices.max(axis=0))

    def transformed(self, rotation, translation) -> "TriangleMesh":
        return TriangleMesh(self.vertices @ np.asarray(rotation).T + np.asarray(translation), self.faces,
                            self.face_colors)

    @staticmethod
    def concatenate(meshes) -> "TriangleMesh":
        meshes = list(meshes)
        if not meshes:
            return TriangleMesh.empty()
        offsets = np.cumsum([0] + [len(m.vertices) for m in meshes[:-1]])
        colors = None
        if all(m.face_colors is not None for m in meshes):
            colors = np.concatenate([m.face_colors for m in meshes])
        return TriangleMesh(np.concatenate([m.vertices for m in meshes]),
                            np.concatenate([m.faces + off for m, off in zip(meshes, offsets)]),
                            colors)


def point_triangle_distance(points, triangles) -> np.ndarray:
    """Minimum Euclidean distance from each point to a set of triangles (exact, brute force)."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    tri = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
    best = np.full(len(p), np.inf)
    for a, b, c in tri:
        best = np.minimum(best, _dist_to_triangle(p, a, b, c))
    return best


def _dist_to_triangle(p, a, b, c) -> np.ndarray:
    # closest-point regions (Ericson, Real-Time Collision Detection 5.1.5)
    ab, ac = b - a, c - a
    ap = p - a
    d1, d2 = ap @ ab, ap @ ac
    bp = p - b
    d3, d4 = bp @ ab, bp @ ac
    cp = p - c
    d5, d6 = cp @ ab, cp @ ac
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    denom = va + vb + vc
    with np.errstate(divide="ignore", invalid="ignore"):
        v = vb / denom
        w = vc / denom
    closest = a + v[:, None] * ab + w[:, None] * ac

    def seg(mask, s, e, t):
        closest[mask] = s + np.clip(t[mask], 0, 1)[:, None] * (e - s)

    with np.errstate(divide="ignore", invalid="ignore"):
        seg((vc <= 0) & (d1 >= 0) & (d3 <= 0), a, b, d1 / (d1 - d3))
        seg((vb <= 0) & (d2 >= 0) & (d6 <= 0), a, c, d2 / (d2 - d6))
        seg((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b, c, (d4 - d3) / ((d4 - d3) + (d5 - d6)))
    closest[(d1 <= 0) & (d2 <= 0)] = a
    closest[(d3 >= 0) & (d4 <= d3)] = b
    closest[(d6 >= 0) & (d5 <= d6)] = c
    return np.linalg.norm(p - closest, axis=1)


@dataclass(frozen=True)
class SceneNormalization:
    """Similarity transform ``unit = (world - center) / scale``; ``scale`` is meters per normalized unit."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def enclosing(cls, box: Aabb, padding: float = 1.1) -> "SceneNormalization":
        """Map ``box`` into the cube [-1, 1]^3 with ``padding`` times its largest half-extent."""
        return cls((box.min + box.max) / 2, float(box.extent.max() / 2 * padding))

    def to_unit(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) / self.scale

    def to_world(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.center

    def box_to_unit(self, box: Aabb) -> Aabb:
        return Aabb(self.to_unit(box.min), self.to_unit(box.max))

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneNormalization":
        return cls(np.array(d["center"], dtype=np.float64), float(d["scale"]))
