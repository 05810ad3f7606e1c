"""Point-to-point ICP."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import PointCloud


@dataclass
class IcpResult:
    rotation: np.ndarray     # target-from-source
    translation: np.ndarray
    rmse: float
    iterations: int
    rmse_history: list[float] = field(default_factory=list)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation


def best_fit_transform(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rigid transform mapping ``src`` onto ``dst`` (Kabsch/Umeyama without scale)."""
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    h = (src - mu_s).T @ (dst - mu_d)
    u, _, vt = np.linalg.svd(h)
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(vt.T @ u.T))])
    rot = vt.T @ fix @ u.T
    return rot, mu_d - rot @ mu_s


def icp_register(source: PointCloud, target: PointCloud, max_iter: int = 100, tol: float = 1e-10,
                 init_rotation=None, init_translation=None) -> IcpResult:
    src = source.points
    dst = target.points
    if len(src) == 0 or len(dst) == 0:
        raise ValueError("ICP needs non-empty clouds")
    sv = np.linalg.svd(src - src.mean(axis=0), compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
        raise ValueError("degenerate source geometry: points are collinear")

    tree = cKDTree(dst)
    rot = np.eye(3) if init_rotation is None else np.asarray(init_rotation, dtype=np.float64)
    trans = np.zeros(3) if init_translation is None else np.asarray(init_translation, dtype=np.float64)
    history: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        dist, idx = tree.query(src @ rot.T + trans)
        history.append(float(np.sqrt(np.mean(dist ** 2))))
        rot, trans = best_fit_transform(src, dst[idx])
        if len(history) > 1 and abs(history[-2] - history[-1]) < tol:
            break
    dist, _ = tree.query(src @ rot.T + trans)
    rmse = float(np.sqrt(np.mean(dist ** 2)))
    history.append(rmse)
    return IcpResult(rot, trans, rmse, it, history)
