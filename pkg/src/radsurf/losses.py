"""Training objectives: photometric L1, radar on-surface, Eikonal and their weighted total."""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class LossWeights:
    surface: float = 1.0
    eikonal: float = 0.1

    def __post_init__(self):
        for name in ("surface", "eikonal"):
            v = getattr(self, name)
            if not (v >= 0 and v < float("inf")):
                raise ValueError(f"loss weight {name} must be finite and non-negative, got {v}")


@dataclass
class LossBreakdown:
    color: torch.Tensor
    surface: torch.Tensor
    eikonal: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {k: float(getattr(self, k).detach()) for k in ("color", "surface", "eikonal", "total")}


def color_loss(rendered, truth) -> torch.Tensor:
    rendered, truth = torch.as_tensor(rendered), torch.as_tensor(truth)
    if rendered.shape != truth.shape:
        raise ValueError(f"shape mismatch: {tuple(rendered.shape)} vs {tuple(truth.shape)}")
    return (rendered - truth.to(rendered.dtype)).abs().mean()


def surface_loss(field: nn.Module, points) -> torch.Tensor:
    """Mean |sdf| at radar points (already in the field's normalized frame)."""
    dtype = next(field.parameters()).dtype
    pts = torch.as_tensor(points, dtype=dtype).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("surface loss needs at least one radar point")
    return field.sdf(pts).abs().mean()


def eikonal_loss(gradients) -> torch.Tensor:
    g = torch.as_tensor(gradients).reshape(-1, 3)
    if len(g) == 0:
        raise ValueError("eikonal loss needs at least one gradient")
    return ((torch.linalg.norm(g, dim=-1) - 1.0) ** 2).mean()


def total_loss(color, surface, eikonal, weights: LossWeights = LossWeights()) -> LossBreakdown:
    color, surface, eikonal = (torch.as_tensor(v, dtype=torch.float64) if not isinstance(v, torch.Tensor) else v
                               for v in (color, surface, eikonal))
    for name, v in (("color", color), ("surface", surface), ("eikonal", eikonal)):
        if v < 0:
            raise ValueError(f"{name} loss is negative")
    total = color + weights.surface * surface + weights.eikonal * eikonal
    return LossBreakdown(color, surface, eikonal, total)
