"""Radar-like scatterer sampling on mesh surfaces.

This is a geometric stand-in for a 3D SAR point cloud, not a physical
simulation: strong scatterers (vertical facades and bands around crease
edges) are sampled more densely than flat surfaces, and points hidden from
the flight path are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import PointCloud, TriangleMesh
from .raycast import cast_rays
from .views import TrajectorySpec

STRONG_INTENSITY = 1.0
WEAK_INTENSITY = 0.3


@dataclass(frozen=True)
class RadarSimSpec:
    density: float = 0.5           # points per m^2 on plain surfaces
    emphasis: float = 3.0          # oversampling factor on facades and edge bands
    noise_sigma: float = 0.0       # m
    visibility: bool = True
    facade_threshold: float = 0.1  # |n . z| below this marks a facade
    edge_band: float = 0.2         # m
    path_samples: int = 9          # viewpoints along the arc used for visibility
    seed: int = 0

    def __post_init__(self):
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.emphasis < 1:
            raise ValueError("emphasis must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")


def crease_edges(mesh: TriangleMesh, cos_tol: float = 0.999) -> np.ndarray:
    """Edges shared by two faces whose normals differ; returns ``(E, 2, 3)`` segment endpoints."""
    normals = mesh.face_normals()
    edges = np.sort(mesh.faces[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    owner = np.repeat(np.arange(len(mesh.faces)), 3)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges, owner = edges[order], owner[order]
    same = (edges[1:] == edges[:-1]).all(axis=1)
    first, second = owner[:-1][same], owner[1:][same]
    creased = np.einsum("ij,ij->i", normals[first], normals[second]) < cos_tol
    return mesh.vertices[edges[:-1][same][creased]]


def _segment_distance(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    best = np.full(len(points), np.inf)
    for a, b in segments:
        ab = b - a
        t = np.clip((points - a) @ ab / (ab @ ab), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(points - (a + t[:, None] * ab), axis=1))
    return best


def sample_triangles(tri: np.ndarray, counts: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform points on triangles, ``counts[f]`` on face f. Returns ``(points, face_index)``."""
    face = np.repeat(np.arange(len(tri)), counts)
    r1 = np.sqrt(rng.random(len(face)))
    r2 = rng.random(len(face))
    a, b, c = tri[face, 0], tri[face, 1], tri[face, 2]
    pts = (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    return pts, face


def visible_from(mesh: TriangleMesh, points: np.ndarray, normals: np.ndarray, eyes: np.ndarray) -> np.ndarray:
    """True where some eye sees the point's front side with an unobstructed line of sight."""
    seen = np.zeros(len(points), dtype=bool)
    for eye in eyes:
        to_eye = eye - points
        facing = np.einsum("ij,ij->i", normals, to_eye) > 0
        todo = facing & ~seen
        if not todo.any():
            continue
        dist = np.linalg.norm(to_eye[todo], axis=1)
        dirs = -to_eye[todo] / dist[:, None]
        t_hit, _ = cast_rays(mesh, np.broadcast_to(eye, dirs.shape), dirs)
        idx = np.flatnonzero(todo)
        seen[idx[t_hit >= dist - 1e-6 * dist - 1e-6]] = True
    return seen


def sample_radar_points(mesh: TriangleMesh, trajectory: TrajectorySpec, spec: RadarSimSpec = RadarSimSpec()) -> PointCloud:
    rng = np.random.default_rng(spec.seed)
    tri = mesh.triangles()
    normals = mesh.face_normals()
    areas = mesh.face_areas()
    facade = np.abs(normals[:, 2]) < spec.facade_threshold

    # sample everything at the emphasized density, then thin plain regions back to base density
    counts = rng.poisson(areas * spec.density * spec.emphasis)
    pts, face = sample_triangles(tri, counts, rng)
    strong = facade[face].copy()
    creases = crease_edges(mesh)
    if len(creases) and len(pts):
        strong |= _segment_distance(pts, creases) <= spec.edge_band
    keep = strong | (rng.random(len(pts)) < 1.0 / spec.emphasis)
    pts, face, strong = pts[keep], face[keep], strong[keep]

    if spec.visibility and len(pts):
        eyes = trajectory.eyes(max(trajectory.view_count, spec.path_samples))
        vis = visible_from(mesh, pts, normals[face], eyes)
        pts, strong = pts[vis], strong[vis]
    if spec.noise_sigma > 0:
        pts = pts + rng.normal(0.0, spec.noise_sigma, pts.shape)
    return PointCloud(pts, np.where(strong, STRONG_INTENSITY, WEAK_INTENSITY))
