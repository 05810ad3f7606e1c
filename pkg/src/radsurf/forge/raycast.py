"""Brute-force ray/triangle casting (Moller-Trumbore), vectorized over triangles."""
from __future__ import annotations

import numpy as np

from ..geometry import TriangleMesh

_EPS = 1e-12


def cast_rays(mesh: TriangleMesh, origins, directions, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """First hit per ray. Returns ``(t, face)``; misses get ``t = inf`` and ``face = -1``."""
    o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    t_best = np.full(len(o), np.inf)
    face = np.full(len(o), -1, dtype=np.int64)
    if mesh.is_empty or len(o) == 0:
        return t_best, face
    tri = mesh.triangles()
    v0 = tri[:, 0]
    e1 = tri[:, 1] - v0
    e2 = tri[:, 2] - v0
    for s in range(0, len(o), chunk):
        oc, dc = o[s:s + chunk, None, :], d[s:s + chunk, None, :]
        p = np.cross(dc, e2)
        det = np.einsum("rfk,fk->rf", p, e1)
        ok = np.abs(det) > _EPS
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = oc - v0
        u = np.einsum("rfk,rfk->rf", tvec, p) * inv
        q = np.cross(tvec, e1)
        v = np.einsum("rk,rfk->rf", dc[:, 0], q) * inv
        t = np.einsum("fk,rfk->rf", e2, q) * inv
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-9)
        t = np.where(hit, t, np.inf)
        idx = np.argmin(t, axis=1)
        tmin = t[np.arange(len(idx)), idx]
        t_best[s:s + chunk] = tmin
        face[s:s + chunk] = np.where(np.isfinite(tmin), idx, -1)
    return t_best, face
