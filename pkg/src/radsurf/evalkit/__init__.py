"""Mesh extraction, reconstruction metrics and convergence plots."""
from __future__ import annotations

from typing import Optional

import numpy as np
from torch import nn

from ..geometry import Aabb, SceneNormalization, TriangleMesh
from .mesh import extract_mesh, sample_mesh_points, sdf_grid
from .metrics import (DEFAULT_TAU_CM, MetricReport, chamfer_l1, compare_clouds, nearest_distances,
                      precision_recall_fscore, write_reports)
from .plots import curve_and_plot, plot_series


def evaluation_box(bundle, vertical_pad: float = 0.1) -> Aabb:
    """Ground-truth scene box in meters, padded vertically by a fraction of its height."""
    meta = bundle.metadata
    if "scene_min" in meta:
        box = Aabb(meta["scene_min"], meta["scene_max"])
    else:
        box = bundle.mesh.bounds()
    pad = np.array([0.0, 0.0, vertical_pad * max(box.extent[2], 1e-6)])
    return Aabb(box.min - pad, box.max + pad)


def tau_from_diagonal(bundle, fraction: float = 0.02) -> float:
    """Threshold in centimeters as a fraction of the scene diagonal."""
    meta = bundle.metadata
    box = Aabb(meta["scene_min"], meta["scene_max"]) if "scene_min" in meta else bundle.mesh.bounds()
    return fraction * box.diagonal * 100.0


def evaluate_mesh(pred: TriangleMesh, gt: TriangleMesh, n_samples: int = 100_000, tau_cm: float = DEFAULT_TAU_CM,
                  seed: int = 0) -> MetricReport:
    gt_pts = sample_mesh_points(gt, n_samples, seed)
    if pred.is_empty:
        return MetricReport(float("inf"), 0.0, 0.0, 0.0, tau_cm, 0, len(gt_pts), empty_mesh=True)
    return compare_clouds(sample_mesh_points(pred, n_samples, seed), gt_pts, tau_cm)


def evaluate_field(field: nn.Module, normalization: SceneNormalization, gt: TriangleMesh, box: Aabb,
                   resolution: int = 96, n_samples: int = 100_000, tau_cm: float = DEFAULT_TAU_CM,
                   seed: int = 0) -> tuple[MetricReport, TriangleMesh]:
    """Extract the field's surface inside ``box`` (meters) and score it against ``gt``."""
    mesh = extract_mesh(field, normalization.box_to_unit(box), resolution, normalization)
    return evaluate_mesh(mesh, gt, n_samples, tau_cm, seed), mesh


def evaluate(checkpoint, bundle, resolution: int = 256, n_samples: int = 100_000, tau_cm: float = DEFAULT_TAU_CM,
             box: Optional[Aabb] = None, seed: int = 0) -> MetricReport:
    field = checkpoint.build_field()
    report, _ = evaluate_field(field, checkpoint.normalization, bundle.mesh, box or evaluation_box(bundle),
                               resolution, n_samples, tau_cm, seed)
    return report


__all__ = [
    "DEFAULT_TAU_CM", "MetricReport", "chamfer_l1", "compare_clouds", "curve_and_plot", "evaluate",
    "evaluate_field", "evaluate_mesh", "evaluation_box", "extract_mesh", "nearest_distances", "plot_series",
    "precision_recall_fscore", "sample_mesh_points", "sdf_grid", "tau_from_diagonal", "write_reports",
]
