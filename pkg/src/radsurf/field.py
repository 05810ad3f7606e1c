"""Learnable signed-distance + color field and closed-form test backends.

Every field maps ``(x, d) -> (sdf, rgb)`` in normalized scene units and
carries an opacity sharpness ``kappa`` consumed by the renderer.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
import torch
from torch import nn


@dataclass(frozen=True)
class FieldConfig:
    pos_freqs: int = 6
    dir_freqs: int = 4
    hidden_width: int = 128
    hidden_depth: int = 6
    color_width: int = 64
    color_depth: int = 3
    geometric_init: bool = True
    init_radius: float = 0.5
    init_kappa: float = 10.0
    kappa_gain: float = 10.0
    scene_scale: float = 1.0

    def __post_init__(self):
        if self.pos_freqs < 0 or self.dir_freqs < 0:
            raise ValueError("frequency counts must be >= 0")
        if min(self.hidden_width, self.hidden_depth, self.color_width, self.color_depth) < 1:
            raise ValueError("network width and depth must be >= 1")
        if self.scene_scale <= 0 or self.init_kappa <= 0 or self.kappa_gain <= 0:
            raise ValueError("scene_scale, init_kappa and kappa_gain must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


class FieldSample(NamedTuple):
    sdf: np.ndarray
    color: np.ndarray


def encoded_size(n_freqs: int) -> int:
    return 3 + 6 * n_freqs


def encode_position(x: torch.Tensor, n_freqs: int) -> torch.Tensor:
    """``[x, sin(2^k pi x), cos(2^k pi x)]`` for k < n_freqs; last axis grows from 3 to 3 + 6L."""
    x = torch.as_tensor(x)
    if n_freqs < 0:
        raise ValueError("n_freqs must be >= 0")
    if n_freqs == 0:
        return x
    scales = (2.0 ** torch.arange(n_freqs, dtype=x.dtype, device=x.device)) * math.pi
    arg = (x[..., None, :] * scales[:, None]).flatten(-2)
    return torch.cat([x, torch.sin(arg), torch.cos(arg)], dim=-1)


class SdfColorField(nn.Module):
    """SDF trunk with one skip connection plus a view-dependent color head.

    The trunk's first output is the signed distance; the remaining outputs
    are a feature vector fed to the color head together with the encoded
    viewing direction.
    """

    def __init__(self, config: FieldConfig = FieldConfig()):
        super().__init__()
        self.config = config
        width, depth = config.hidden_width, config.hidden_depth
        in_dim = encoded_size(config.pos_freqs)
        self.skip_at = depth // 2 if depth >= 2 and width > in_dim else None

        layers = []
        for i in range(depth):
            d_in = in_dim if i == 0 else width
            d_out = width
            if self.skip_at is not None and i + 1 == self.skip_at:
                d_out = width - in_dim
            layers.append(nn.Linear(d_in, d_out))
        self.trunk = nn.ModuleList(layers)
        self.sdf_out = nn.Linear(width, 1 + width)
        self.act = nn.Softplus(beta=100)

        color_in = width + encoded_size(config.dir_freqs)
        head = []
        for i in range(config.color_depth):
            head += [nn.Linear(color_in if i == 0 else config.color_width, config.color_width), nn.ReLU()]
        head.append(nn.Linear(config.color_width, 3))
        self.color_head = nn.Sequential(*head)

        # kappa = exp(gain * v): the gain lets the sharpness move at a useful rate under a small learning rate
        self.kappa_exponent = nn.Parameter(torch.tensor(math.log(config.init_kappa) / config.kappa_gain))
        if config.geometric_init:
            self._geometric_init(in_dim)

    @torch.no_grad()
    def _geometric_init(self, in_dim: int):
        # sphere init: trunk starts close to |x| - r (Atzmon & Lipman)
        width = self.config.hidden_width
        for i, lin in enumerate(self.trunk):
            out_dim = lin.out_features
            nn.init.normal_(lin.weight, 0.0, math.sqrt(2) / math.sqrt(out_dim))
            nn.init.zeros_(lin.bias)
            if i == 0 and self.config.pos_freqs > 0:
                lin.weight[:, 3:] = 0.0
            if self.skip_at is not None and i == self.skip_at and self.config.pos_freqs > 0:
                lin.weight[:, -(in_dim - 3):] = 0.0
        nn.init.normal_(self.sdf_out.weight, 0.0, math.sqrt(2) / math.sqrt(width))
        nn.init.zeros_(self.sdf_out.bias)
        nn.init.normal_(self.sdf_out.weight[:1], math.sqrt(math.pi) / math.sqrt(width), 1e-4)
        self.sdf_out.bias[:1] = -self.config.init_radius

    @property
    def kappa(self) -> torch.Tensor:
        return torch.exp(self.config.kappa_gain * self.kappa_exponent)

    def _trunk(self, x: torch.Tensor) -> torch.Tensor:
        enc = encode_position(x, self.config.pos_freqs)
        h = enc
        for i, lin in enumerate(self.trunk):
            if i == self.skip_at:
                h = torch.cat([h, enc], dim=-1) / math.sqrt(2)
            h = self.act(lin(h))
        return self.sdf_out(h)

    def sdf(self, x: torch.Tensor) -> torch.Tensor:
        return self._trunk(x)[..., 0]

    def forward(self, x: torch.Tensor, d: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        out = self._trunk(x)
        feat = torch.cat([out[..., 1:], encode_position(d, self.config.dir_freqs)], dim=-1)
        return out[..., 0], torch.sigmoid(self.color_head(feat))


class AnalyticField(nn.Module):
    """Closed-form SDF with constant gray color; same interface as :class:`SdfColorField`."""

    def __init__(self, kappa: float = 100.0):
        super().__init__()
        self.log_kappa = nn.Parameter(torch.tensor(math.log(kappa), dtype=torch.float64), requires_grad=False)

    @property
    def kappa(self) -> torch.Tensor:
        return self.log_kappa.exp()

    def forward(self, x, d):
        s = self.sdf(x)
        return s, torch.full((*s.shape, 3), 0.5, dtype=s.dtype, device=s.device)


class SphereField(AnalyticField):
    def __init__(self, center=(0.0, 0.0, 0.0), radius: float = 0.5, kappa: float = 100.0):
        super().__init__(kappa)
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        self.register_buffer("center", torch.tensor(center, dtype=torch.float64))
        self.radius = float(radius)

    def sdf(self, x):
        return torch.linalg.norm(x - self.center.to(x.dtype), dim=-1) - self.radius


class PlaneField(AnalyticField):
    def __init__(self, normal=(0.0, 0.0, 1.0), offset: float = 0.0, kappa: float = 100.0):
        super().__init__(kappa)
        n = torch.tensor(normal, dtype=torch.float64)
        if torch.linalg.norm(n) == 0:
            raise ValueError("plane normal must be non-zero")
        self.register_buffer("normal", n / torch.linalg.norm(n))
        self.offset = float(offset)

    def sdf(self, x):
        return x @ self.normal.to(x.dtype) - self.offset


class BoxField(AnalyticField):
    def __init__(self, lo, hi, kappa: float = 100.0):
        super().__init__(kappa)
        lo = torch.tensor(lo, dtype=torch.float64)
        hi = torch.tensor(hi, dtype=torch.float64)
        if (hi <= lo).any():
            raise ValueError("box must have positive extent on every axis")
        self.register_buffer("center", (lo + hi) / 2)
        self.register_buffer("half_extent", (hi - lo) / 2)

    def sdf(self, x):
        q = (x - self.center.to(x.dtype)).abs() - self.half_extent.to(x.dtype)
        outside = torch.linalg.norm(q.clamp(min=0), dim=-1)
        inside = q.max(dim=-1).values.clamp(max=0)
        return outside + inside


def analytic_field(shape: str, **params) -> AnalyticField:
    """Build a closed-form backend: ``sphere(center, radius)``, ``plane(normal, offset)`` or ``box(lo, hi)``."""
    factories = {"sphere": SphereField, "plane": PlaneField, "box": BoxField}
    if shape not in factories:
        raise ValueError(f"unknown analytic shape {shape!r}")
    return factories[shape](**params)


def _check_finite(*tensors):
    for t in tensors:
        if not torch.isfinite(t).all():
            raise ValueError("non-finite field input")


def _param_dtype(field: nn.Module) -> torch.dtype:
    return next(field.parameters()).dtype


def query_field(field: nn.Module, x, d) -> FieldSample:
    """Evaluate the field without tracking gradients; accepts single points or batches."""
    dtype = _param_dtype(field)
    x = torch.as_tensor(np.asarray(x), dtype=dtype)
    d = torch.as_tensor(np.asarray(d), dtype=dtype)
    _check_finite(x, d)
    with torch.no_grad():
        s, c = field(x, d)
    return FieldSample(s.numpy(), c.numpy())


def sdf_gradient(field: nn.Module, x, create_graph: bool = False) -> torch.Tensor:
    """Exact spatial gradient of the SDF by reverse-mode autodiff."""
    dtype = _param_dtype(field)
    x = torch.as_tensor(x, dtype=dtype)
    _check_finite(x)
    x = x.detach().requires_grad_(True)
    with torch.enable_grad():
        s = field.sdf(x)
        (grad,) = torch.autograd.grad(s.sum(), x, create_graph=create_graph)
    return grad
