"""Point-set reconstruction metrics.

CD-l1 here is the symmetric mean of Euclidean nearest-neighbor distances,
``0.5 * (mean_pred d(p, gt) + mean_gt d(g, pred))``, reported in centimeters.
Definitions of this metric vary between papers; this one is fixed for the package.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import PointCloud

CM_PER_M = 100.0
DEFAULT_TAU_CM = 100.0


@dataclass
class MetricReport:
    cd_l1: float          # cm
    precision: float      # %
    recall: float         # %
    fscore: float         # %
    tau: float            # cm
    n_pred: int
    n_gt: int
    empty_mesh: bool = False

    def row(self) -> dict:
        return asdict(self)


def _points(cloud) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("metric needs non-empty point sets")
    return pts


def nearest_distances(query, reference) -> np.ndarray:
    """Exact Euclidean distance from each query point to its nearest reference point (meters)."""
    dist, _ = cKDTree(_points(reference)).query(_points(query), k=1)
    return dist


def chamfer_l1(pred, gt) -> float:
    d_pg = nearest_distances(pred, gt)
    d_gp = nearest_distances(gt, pred)
    return float(0.5 * (d_pg.mean() + d_gp.mean()) * CM_PER_M)


def fscore(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def precision_recall_fscore(pred, gt, tau_cm: float = DEFAULT_TAU_CM) -> tuple[float, float, float]:
    if tau_cm <= 0:
        raise ValueError("threshold must be positive")
    tau = tau_cm / CM_PER_M
    precision = 100.0 * float(np.mean(nearest_distances(pred, gt) <= tau))
    recall = 100.0 * float(np.mean(nearest_distances(gt, pred) <= tau))
    return precision, recall, fscore(precision, recall)


def compare_clouds(pred, gt, tau_cm: float = DEFAULT_TAU_CM) -> MetricReport:
    p, g = _points(pred), _points(gt)
    d_pg = nearest_distances(p, g)
    d_gp = nearest_distances(g, p)
    tau = tau_cm / CM_PER_M
    prec = 100.0 * float(np.mean(d_pg <= tau))
    rec = 100.0 * float(np.mean(d_gp <= tau))
    return MetricReport(float(0.5 * (d_pg.mean() + d_gp.mean()) * CM_PER_M), prec, rec, fscore(prec, rec), tau_cm,
                        len(p), len(g))


def write_reports(rows: list[dict], path) -> None:
    """Comma-separated records with a header; each row is a report dict plus optional label columns."""
    if not rows:
        raise ValueError("no reports to write")
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
