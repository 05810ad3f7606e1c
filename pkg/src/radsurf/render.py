"""Differentiable volume rendering of SDF fields.

Opacity of segment i comes from the logistic CDF of the SDF at its two
endpoints, ``alpha_i = max((Phi(s_i) - Phi(s_{i+1})) / Phi(s_i), 0)``; weights
are ``w_i = T_i alpha_i`` with ``T_i = prod_{j<i} (1 - alpha_j)``. N samples
therefore yield N - 1 segments. There is no background term.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .geometry import Ray

PHI_FLOOR = 1e-7


@dataclass(frozen=True)
class RaySamples:
    t: np.ndarray

    def __post_init__(self):
        if not (np.diff(self.t) > 0).all():
            raise ValueError("sample parameters must be strictly ascending")

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.t)


@dataclass
class RenderConfig:
    n_samples: int = 64
    jitter: bool = True

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples per ray")


@dataclass
class RenderOutput:
    color: torch.Tensor          # (..., 3)
    weights: torch.Tensor        # (..., N-1)
    transmittance: torch.Tensor  # (..., N-1)
    depth: torch.Tensor          # (...)
    opacity: torch.Tensor        # (...)
    t: Optional[torch.Tensor] = None       # (..., N) sample parameters
    points: Optional[torch.Tensor] = None  # (..., N, 3) sample positions


def stratified_t(t_near, t_far, n: int, rng: Optional[np.random.Generator] = None, jitter: bool = True) -> np.ndarray:
    """One sample per uniform bin of ``[t_near, t_far]`` for every ray; bin midpoints if jitter is off."""
    t_near = np.atleast_1d(np.asarray(t_near, dtype=np.float64))
    t_far = np.atleast_1d(np.asarray(t_far, dtype=np.float64))
    if n < 2:
        raise ValueError("need at least 2 samples per ray")
    if not (t_far > t_near).all():
        raise ValueError("inverted or empty sampling interval")
    if jitter:
        if rng is None:
            raise ValueError("jittered sampling needs a random generator")
        u = rng.random((len(t_near), n))
    else:
        u = np.full((len(t_near), n), 0.5)
    frac = (np.arange(n) + u) / n
    return t_near[:, None] + (t_far - t_near)[:, None] * frac


def sample_stratified(t_near: float, t_far: float, n: int, rng: Optional[np.random.Generator] = None,
                      jitter: bool = True) -> RaySamples:
    return RaySamples(stratified_t(t_near, t_far, n, rng, jitter)[0])


def sdf_to_opacity(s_i, s_next, kappa):
    """Segment opacity from consecutive SDF values; works on floats or tensors."""
    is_tensor = any(isinstance(v, torch.Tensor) for v in (s_i, s_next, kappa))
    s_i, s_next, kappa = (torch.as_tensor(v, dtype=torch.float64) if not isinstance(v, torch.Tensor) else v
                          for v in (s_i, s_next, kappa))
    if (kappa <= 0).any():
        raise ValueError("kappa must be positive")
    phi_i = torch.sigmoid(kappa * s_i)
    phi_next = torch.sigmoid(kappa * s_next)
    alpha = ((phi_i - phi_next) / phi_i.clamp(min=PHI_FLOOR)).clamp(0.0, 1.0)
    return alpha if is_tensor else float(alpha)


def composite(alphas, colors) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Front-to-back compositing. Returns ``(color, weights, transmittance)``."""
    alphas = torch.as_tensor(alphas)
    colors = torch.as_tensor(colors, dtype=alphas.dtype)
    if (alphas < 0).any() or (alphas > 1).any():
        raise ValueError("opacities must lie in [0, 1]")
    ones = torch.ones_like(alphas[..., :1])
    trans = torch.cumprod(torch.cat([ones, 1.0 - alphas[..., :-1]], dim=-1), dim=-1)
    weights = trans * alphas
    return (weights[..., None] * colors).sum(dim=-2), weights, trans


def render_rays(field: nn.Module, origins, directions, t_near, t_far, config: RenderConfig = RenderConfig(),
                rng: Optional[np.random.Generator] = None) -> RenderOutput:
    """Render a batch of rays through ``field`` (all inputs in the field's normalized frame)."""
    dtype = next(field.parameters()).dtype
    o = torch.as_tensor(np.asarray(origins), dtype=dtype).reshape(-1, 3)
    d = torch.as_tensor(np.asarray(directions), dtype=dtype).reshape(-1, 3)
    t = torch.as_tensor(stratified_t(t_near, t_far, config.n_samples, rng, config.jitter), dtype=dtype)
    pts = o[:, None, :] + t[..., None] * d[:, None, :]
    dirs = d[:, None, :].expand_as(pts)
    sdf, rgb = field(pts, dirs)
    alpha = sdf_to_opacity(sdf[:, :-1], sdf[:, 1:], field.kappa)
    color, weights, trans = composite(alpha, rgb[:, :-1])
    return RenderOutput(color, weights, trans, (weights * t[:, :-1]).sum(-1), weights.sum(-1), t, pts)


def render_ray(field: nn.Module, ray: Ray, bounds: tuple[float, float], config: RenderConfig = RenderConfig(),
               rng: Optional[np.random.Generator] = None) -> RenderOutput:
    out = render_rays(field, ray.origin, ray.direction, [bounds[0]], [bounds[1]], config, rng)
    return RenderOutput(out.color[0], out.weights[0], out.transmittance[0], out.depth[0], out.opacity[0],
                        out.t[0], out.points[0])
