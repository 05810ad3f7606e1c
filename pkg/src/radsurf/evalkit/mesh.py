"""Zero-level-set extraction and surface point sampling."""
from __future__ import annotations

from typing import Optional

import numpy as np
import torch
from skimage import measure
from torch import nn

from ..geometry import Aabb, PointCloud, SceneNormalization, TriangleMesh


def sdf_grid(field: nn.Module, bounds: Aabb, resolution: int, chunk: int = 65536) -> np.ndarray:
    """SDF sampled on the ``(resolution + 1)^3`` lattice spanning ``bounds``."""
    dtype = next(field.parameters()).dtype
    axes = [np.linspace(bounds.min[k], bounds.max[k], resolution + 1) for k in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    out = np.empty(len(pts))
    with torch.no_grad():
        for s in range(0, len(pts), chunk):
            out[s:s + chunk] = field.sdf(torch.as_tensor(pts[s:s + chunk], dtype=dtype)).double().numpy()
    return out.reshape((resolution + 1,) * 3)


def extract_mesh(field: nn.Module, bounds: Aabb, resolution: int,
                 normalization: Optional[SceneNormalization] = None) -> TriangleMesh:
    """Marching cubes on the field's zero level set; vertices in meters when ``normalization`` is given.

    ``bounds`` are in the field's own frame. A grid without a sign change yields an empty mesh.
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    grid = sdf_grid(field, bounds, resolution)
    if not (grid.min() < 0 < grid.max()):
        return TriangleMesh.empty()
    spacing = tuple(bounds.extent / resolution)
    verts, faces, _, _ = measure.marching_cubes(grid, level=0.0, spacing=spacing)
    verts = verts + bounds.min
    faces = faces[(faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])]
    if normalization is not None:
        verts = normalization.to_world(verts)
    return TriangleMesh(verts, faces)


def sample_mesh_points(mesh: TriangleMesh, n: int, seed: int = 0) -> PointCloud:
    """Area-weighted uniform samples on the surface."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if mesh.is_empty:
        raise ValueError("cannot sample an empty mesh")
    rng = np.random.default_rng(seed)
    areas = mesh.face_areas()
    face = rng.choice(len(areas), size=n, p=areas / areas.sum())
    tri = mesh.triangles()[face]
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    pts = (1 - r1)[:, None] * tri[:, 0] + (r1 * (1 - r2))[:, None] * tri[:, 1] + (r1 * r2)[:, None] * tri[:, 2]
    return PointCloud(pts)
