"""Radar-guided ray selection and ray bounding.

Selection splits the per-iteration budget P into ``floor(lambda * P)`` rays
drawn from pixels covered by projected radar points and ``P - floor(lambda * P)``
rays drawn from every pixel of every image. Bounding clips rays to a box whose
vertical limits are the radar cloud's ground and top elevations.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry import Aabb, CameraModel, PointCloud, Ray, intersect_aabb_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadarMask:
    mask: np.ndarray
    image_id: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def save_png(self, path) -> None:
        Image.fromarray(self.mask.astype(np.uint8) * 255).save(path)


@dataclass(frozen=True)
class RaySelectionConfig:
    rays_per_iter: int = 512
    radar_fraction: float = 0.4
    dilation: int = 2

    def __post_init__(self):
        if self.rays_per_iter < 1:
            raise ValueError("rays_per_iter must be >= 1")
        if not 0.0 <= self.radar_fraction <= 1.0:
            raise ValueError("radar_fraction must lie in [0, 1]")
        if self.dilation < 0:
            raise ValueError("dilation must be >= 0")

    @property
    def radar_count(self) -> int:
        return math.floor(self.radar_fraction * self.rays_per_iter)


@dataclass
class RaySelection:
    image_ids: np.ndarray
    cols: np.ndarray
    rows: np.ndarray
    from_radar: np.ndarray

    def __len__(self):
        return len(self.image_ids)

    def subset(self, keep: np.ndarray) -> "RaySelection":
        return RaySelection(self.image_ids[keep], self.cols[keep], self.rows[keep], self.from_radar[keep])

    def pixels(self) -> list[tuple[int, tuple[int, int]]]:
        return [(int(i), (int(c), int(r))) for i, c, r in zip(self.image_ids, self.cols, self.rows)]

    @staticmethod
    def concatenate(parts: Sequence["RaySelection"]) -> "RaySelection":
        return RaySelection(*(np.concatenate([getattr(p, f) for p in parts])
                              for f in ("image_ids", "cols", "rows", "from_radar")))


def build_radar_mask(camera: CameraModel, cloud: PointCloud, dilation: int = 2, image_id: int = 0) -> RadarMask:
    mask = np.zeros((camera.image_height, camera.image_width), dtype=bool)
    if len(cloud):
        uv, valid = camera.project(cloud.points)
        px = np.floor(uv[valid]).astype(np.int64)
        mask[px[:, 1], px[:, 0]] = True
    if dilation > 0 and mask.any():
        mask = ndimage.binary_dilation(mask, structure=np.ones((2 * dilation + 1,) * 2, dtype=bool))
    return RadarMask(mask, image_id)


class RaySampler:
    """Draws pixel batches per the radar/global split; pools are precomputed once."""

    def __init__(self, masks: Sequence[RadarMask], config: RaySelectionConfig):
        if not masks:
            raise ValueError("need at least one training image")
        self.config = config
        self.shapes = np.array([m.shape for m in masks])  # (H, W)
        sizes = self.shapes[:, 0] * self.shapes[:, 1]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)])
        self._radar_flat = np.concatenate([np.flatnonzero(m.mask) + off for m, off in zip(masks, self._offsets)])
        self._warned = False

    @property
    def total_pixels(self) -> int:
        return int(self._offsets[-1])

    def _unflatten(self, flat: np.ndarray, from_radar: bool) -> RaySelection:
        img = np.searchsorted(self._offsets, flat, side="right") - 1
        local = flat - self._offsets[img]
        width = self.shapes[img, 1]
        return RaySelection(img, local % width, local // width, np.full(len(flat), from_radar))

    def draw_radar(self, n: int, rng: np.random.Generator) -> RaySelection:
        return self._unflatten(self._radar_flat[rng.integers(0, len(self._radar_flat), n)], True)

    def draw_global(self, n: int, rng: np.random.Generator) -> RaySelection:
        return self._unflatten(rng.integers(0, self.total_pixels, n), False)

    def has_radar_pixels(self) -> bool:
        return len(self._radar_flat) > 0

    def select(self, rng: np.random.Generator, count: Optional[int] = None) -> RaySelection:
        cfg = self.config
        p = cfg.rays_per_iter if count is None else count
        n_radar = math.floor(cfg.radar_fraction * p)
        if n_radar > 0 and not self.has_radar_pixels():
            if not self._warned:
                log.warning("radar fraction %.2f requested but every radar mask is empty; drawing all rays globally",
                            cfg.radar_fraction)
                self._warned = True
            n_radar = 0
        parts = [self.draw_radar(n_radar, rng)] if n_radar else []
        parts.append(self.draw_global(p - n_radar, rng))
        return RaySelection.concatenate(parts)


def select_rays(masks: Sequence[RadarMask], config: RaySelectionConfig, rng: np.random.Generator) -> RaySelection:
    return RaySampler(masks, config).select(rng)


@dataclass(frozen=True)
class SceneBounds:
    xy_min: np.ndarray
    xy_max: np.ndarray
    z_ground: float
    z_top: float
    horizontal_margin: float = 0.0
    vertical_margin: float = 0.0

    def __post_init__(self):
        if not self.z_ground < self.z_top:
            raise ValueError("z_ground must lie below z_top")
        if self.horizontal_margin < 0 or self.vertical_margin < 0:
            raise ValueError("margins must be non-negative")
        object.__setattr__(self, "xy_min", np.asarray(self.xy_min, dtype=np.float64))
        object.__setattr__(self, "xy_max", np.asarray(self.xy_max, dtype=np.float64))

    def box(self) -> Aabb:
        return Aabb(np.r_[self.xy_min, self.z_ground], np.r_[self.xy_max, self.z_top])

    def transformed(self, norm) -> "SceneBounds":
        """Express the bounds in a :class:`SceneNormalization`'s unit frame."""
        b = norm.box_to_unit(self.box())
        return SceneBounds(b.min[:2], b.max[:2], float(b.min[2]), float(b.max[2]),
                           self.horizontal_margin, self.vertical_margin)


def derive_scene_bounds(cloud: PointCloud, horizontal_margin: float = 0.05, vertical_margin: float = 0.1,
                        percentiles: tuple[float, float] = (1.0, 99.0)) -> SceneBounds:
    """Robust scene box from radar percentiles; each side is padded by ``margin * span`` of its axis."""
    if len(cloud) < 10:
        raise ValueError(f"need at least 10 radar points to derive bounds, got {len(cloud)}")
    lo, hi = np.percentile(cloud.points, percentiles, axis=0)
    span = hi - lo
    pad = np.array([horizontal_margin, horizontal_margin, vertical_margin]) * span
    lo, hi = lo - pad, hi + pad
    if hi[2] <= lo[2]:
        hi[2] = lo[2] + 1e-6
    return SceneBounds(lo[:2], hi[:2], float(lo[2]), float(hi[2]), horizontal_margin, vertical_margin)


def compute_ray_bounds_batch(origins, directions, bounds: SceneBounds):
    box = bounds.box()
    return intersect_aabb_batch(origins, directions, box.min, box.max)


def compute_ray_bounds(ray: Ray, bounds: SceneBounds) -> Optional[tuple[float, float]]:
    t_near, t_far, hit = compute_ray_bounds_batch(ray.origin, ray.direction, bounds)
    if not hit[0]:
        return None
    return float(t_near[0]), float(t_far[0])
