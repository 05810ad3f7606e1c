"""Camera arcs and flat-shaded ray-cast rendering of scene meshes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import CameraModel, TriangleMesh
from .raycast import cast_rays

SUN_DIRECTION = np.array([0.45, 0.3, 0.84]) / np.linalg.norm([0.45, 0.3, 0.84])
AMBIENT = 0.3


@dataclass(frozen=True)
class TrajectorySpec:
    """Cameras on a horizontal arc around ``center``; azimuth 0 points along +x."""

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 120.0
    altitude: float = 120.0
    span_deg: float = 40.0
    view_count: int = 5
    target: tuple[float, float, float] = (0.0, 0.0, 0.0)
    heading_deg: float = 0.0

    def __post_init__(self):
        if self.view_count < 1:
            raise ValueError("view_count must be >= 1")
        if self.radius <= 0 or self.altitude <= 0:
            raise ValueError("radius and altitude must be positive")

    def azimuths(self, count: int | None = None) -> np.ndarray:
        n = self.view_count if count is None else count
        if n == 1:
            return np.array([self.heading_deg])
        return self.heading_deg + np.linspace(-self.span_deg / 2, self.span_deg / 2, n)

    def eyes(self, count: int | None = None) -> np.ndarray:
        az = np.radians(self.azimuths(count))
        c = np.asarray(self.center, dtype=np.float64)
        return np.stack([c[0] + self.radius * np.cos(az), c[1] + self.radius * np.sin(az),
                         np.full_like(az, c[2] + self.altitude)], axis=1)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySpec":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


@dataclass(frozen=True)
class CameraTemplate:
    width: int = 128
    height: int = 128
    fov_deg: float = 40.0


def shade(mesh: TriangleMesh, faces: np.ndarray) -> np.ndarray:
    """Flat shading: face color times (ambient + (1 - ambient) * max(0, n . sun)); black for misses."""
    out = np.zeros((len(faces), 3))
    hit = faces >= 0
    if hit.any():
        normals = mesh.face_normals()[faces[hit]]
        lambert = np.maximum(normals @ SUN_DIRECTION, 0.0)
        colors = mesh.face_colors[faces[hit]] if mesh.face_colors is not None else np.full((hit.sum(), 3), 0.7)
        out[hit] = colors * (AMBIENT + (1 - AMBIENT) * lambert)[:, None]
    return out


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)


def render_image(mesh: TriangleMesh, camera: CameraModel) -> np.ndarray:
    rows, cols = np.mgrid[0:camera.image_height, 0:camera.image_width]
    origins, dirs = camera.pixel_rays(cols.ravel() + 0.5, rows.ravel() + 0.5)
    _, faces = cast_rays(mesh, origins, dirs)
    return to_uint8(shade(mesh, faces)).reshape(camera.image_height, camera.image_width, 3)


def trajectory_cameras(trajectory: TrajectorySpec, template: CameraTemplate = CameraTemplate()) -> list[CameraModel]:
    return [CameraModel.look_at(eye, trajectory.target, template.width, template.height, template.fov_deg)
            for eye in trajectory.eyes()]


def render_views(mesh: TriangleMesh, trajectory: TrajectorySpec,
                 template: CameraTemplate = CameraTemplate()) -> tuple[list[np.ndarray], list[CameraModel]]:
    cameras = trajectory_cameras(trajectory, template)
    return [render_image(mesh, cam) for cam in cameras], cameras
