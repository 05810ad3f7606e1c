"""Joint image + radar optimization of the SDF field."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from .field import FieldConfig, SdfColorField, sdf_gradient
from .forge.bundle import DatasetBundle
from .geometry import Aabb, PointCloud, SceneNormalization, intersect_aabb_batch
from .losses import LossBreakdown, LossWeights, color_loss, eikonal_loss, surface_loss, total_loss
from .rays import (RaySampler, RaySelection, RaySelectionConfig, SceneBounds, build_radar_mask,
                   compute_ray_bounds_batch, derive_scene_bounds)
from .render import RenderConfig, render_rays

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"RSDF0001"
LOG_COLUMNS = ("iteration", "color", "surface", "eikonal", "total", "kappa", "wall_ms", "rays_rejected")


class TrainingAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5000
    rays_per_iter: int = 512
    n_samples: int = 64
    learning_rate: float = 5e-4
    lr_schedule: str = "cosine"
    lr_floor: float = 0.05
    surface_weight: float = 1.0
    eikonal_weight: float = 0.1
    surface_warmup: int = 500
    radar_fraction: float = 0.4
    mask_dilation: int = 2
    use_bounds: bool = True
    horizontal_margin: float = 0.05
    vertical_margin: float = 0.1
    eikonal_points: int = 512
    max_redraws: int = 5
    seed: int = 0
    log_every: int = 1
    checkpoint_every: int = 0
    eval_every: int = 0
    field: FieldConfig = FieldConfig()

    def __post_init__(self):
        for name in ("iterations", "rays_per_iter", "n_samples", "log_every", "eikonal_points"):
            if getattr(self, name) < 1 and not (name == "iterations" and self.iterations == 0):
                raise ValueError(f"{name} must be >= 1")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        LossWeights(self.surface_weight, self.eikonal_weight)
        RaySelectionConfig(self.rays_per_iter, self.radar_fraction, self.mask_dilation)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.surface_weight, self.eikonal_weight)

    @property
    def selection(self) -> RaySelectionConfig:
        return RaySelectionConfig(self.rays_per_iter, self.radar_fraction, self.mask_dilation)

    def image_only(self) -> "TrainConfig":
        """Baseline without any radar input: no surface loss, no radar rays, fixed cube interval."""
        return replace(self, surface_weight=0.0, radar_fraction=0.0, use_bounds=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["field"] = self.field.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        fc = FieldConfig(**d.pop("field", {}))
        return cls(field=fc, **d)


@dataclass
class IterationLog:
    iteration: int
    color: float
    surface: float
    eikonal: float
    total: float
    kappa: float
    wall_ms: float
    rays_rejected: int

    def row(self) -> list:
        return [getattr(self, c) for c in LOG_COLUMNS]

    def losses(self) -> tuple[float, float, float, float]:
        return self.color, self.surface, self.eikonal, self.total


@dataclass
class TrainData:
    """A bundle prepared for training: tensors in the normalized frame plus ray pools."""

    bundle: DatasetBundle
    normalization: SceneNormalization
    images: torch.Tensor  # (V, H, W, 3) in [0, 1]
    cloud_unit: np.ndarray
    sampler: RaySampler
    interval_box: Aabb  # in unit frame; radar-derived when bounding is on, else the fixed cube

    @classmethod
    def prepare(cls, bundle: DatasetBundle, config: TrainConfig) -> "TrainData":
        if not bundle.images:
            raise ValueError("dataset has no images")
        norm = scene_normalization(bundle)
        cloud = bundle.cloud
        needs_cloud = config.surface_weight > 0 or config.radar_fraction > 0 or config.use_bounds
        if needs_cloud and len(cloud) == 0:
            raise ValueError("radar cloud is empty but the configuration uses it")
        sel = config.selection
        masks = [build_radar_mask(cam, cloud if config.radar_fraction > 0 else PointCloud(np.zeros((0, 3))),
                                  sel.dilation, i)
                 for i, cam in enumerate(bundle.cameras)]
        if config.use_bounds:
            world = derive_scene_bounds(cloud, config.horizontal_margin, config.vertical_margin)
            box = world.transformed(norm).box()
        else:
            box = Aabb.cube(1.0)
        images = torch.from_numpy(np.stack(bundle.images).astype(np.float32) / 255.0)
        return cls(bundle, norm, images, norm.to_unit(cloud.points), RaySampler(masks, sel), box)


def scene_normalization(bundle: DatasetBundle) -> SceneNormalization:
    meta = bundle.metadata
    if "scene_min" in meta and "scene_max" in meta:
        box = Aabb(meta["scene_min"], meta["scene_max"])
    else:
        box = Aabb(bundle.cloud.points.min(axis=0), bundle.cloud.points.max(axis=0))
    return SceneNormalization.enclosing(box, padding=1.1)


@dataclass
class TrainState:
    field: SdfColorField
    optimizer: torch.optim.Optimizer
    scheduler: torch.optim.lr_scheduler.LambdaLR
    rng: np.random.Generator
    surface_rng: np.random.Generator
    iteration: int = 0


def make_field(config: TrainConfig, normalization: Optional[SceneNormalization] = None) -> SdfColorField:
    torch.manual_seed(config.seed)
    fc = config.field
    if normalization is not None:
        fc = replace(fc, scene_scale=normalization.scale)
    return SdfColorField(fc)


def init_state(config: TrainConfig, normalization: Optional[SceneNormalization] = None) -> TrainState:
    fld = make_field(config, normalization)
    opt = torch.optim.Adam(fld.parameters(), lr=config.learning_rate)
    total = max(config.iterations, 1)

    def factor(step: int) -> float:
        if config.lr_schedule == "constant":
            return 1.0
        progress = min(step / total, 1.0)
        return config.lr_floor + (1 - config.lr_floor) * 0.5 * (1 + math.cos(math.pi * progress))

    sched = torch.optim.lr_scheduler.LambdaLR(opt, factor)
    ss = np.random.SeedSequence(config.seed)
    main, surf = ss.spawn(2)
    return TrainState(fld, opt, sched, np.random.default_rng(main), np.random.default_rng(surf))


def _rays_for(data: TrainData, sel: RaySelection) -> tuple[np.ndarray, np.ndarray]:
    origins = np.empty((len(sel), 3))
    dirs = np.empty((len(sel), 3))
    for img in np.unique(sel.image_ids):
        m = sel.image_ids == img
        o, d = data.bundle.cameras[img].pixel_rays(sel.cols[m] + 0.5, sel.rows[m] + 0.5)
        origins[m], dirs[m] = o, d
    return data.normalization.to_unit(origins), dirs


def draw_bounded_batch(data: TrainData, config: TrainConfig, rng: np.random.Generator):
    """Select rays, clip them to the sampling volume, and redraw misses from the pool they came from."""
    box = data.interval_box
    sel = data.sampler.select(rng)
    kept = []
    rejected = 0
    for attempt in range(config.max_redraws + 1):
        o, d = _rays_for(data, sel)
        t0, t1, hit = intersect_aabb_batch(o, d, box.min, box.max)
        kept.append((sel.subset(hit), o[hit], d[hit], t0[hit], t1[hit]))
        miss = ~hit
        if not miss.any():
            break
        rejected += int(miss.sum())
        if attempt == config.max_redraws:
            break
        n_radar = int((miss & sel.from_radar).sum())
        chunk = [data.sampler.draw_radar(n_radar, rng)] if n_radar else []
        chunk.append(data.sampler.draw_global(int(miss.sum()) - n_radar, rng))
        sel = RaySelection.concatenate(chunk)
    sels, o, d, t0, t1 = zip(*kept)
    return (RaySelection.concatenate(sels), np.concatenate(o), np.concatenate(d),
            np.concatenate(t0), np.concatenate(t1), rejected)


def _surface_weight(config: TrainConfig, iteration: int) -> float:
    if config.surface_warmup <= 0:
        return config.surface_weight
    return config.surface_weight * min(1.0, (iteration + 1) / config.surface_warmup)


def compute_losses(state: TrainState, data: TrainData, config: TrainConfig):
    """Forward pass of one iteration; returns ``(breakdown, rays_rejected)`` with a differentiable total."""
    fld = state.field
    rng = state.rng
    sel, o, d, t0, t1, rejected = draw_bounded_batch(data, config, rng)
    if len(sel) == 0:
        raise TrainingAborted("no ray intersected the sampling volume")
    out = render_rays(fld, o, d, t0, t1, RenderConfig(config.n_samples, jitter=True), rng)
    truth = data.images[torch.from_numpy(sel.image_ids), torch.from_numpy(sel.rows), torch.from_numpy(sel.cols)]
    l_color = color_loss(out.color, truth)

    n_eik = config.eikonal_points
    n_ray = n_eik // 2
    flat = out.points.detach().reshape(-1, 3)
    ray_pts = flat[torch.from_numpy(rng.integers(0, len(flat), n_ray))]
    uni_pts = torch.from_numpy(rng.uniform(-1.0, 1.0, (n_eik - n_ray, 3))).to(flat.dtype)
    grads = sdf_gradient(fld, torch.cat([ray_pts, uni_pts]), create_graph=True)
    l_eik = eikonal_loss(grads)

    w_surface = _surface_weight(config, state.iteration)
    idx = state.surface_rng.integers(0, max(len(data.cloud_unit), 1), config.rays_per_iter)
    if len(data.cloud_unit) == 0:
        l_surf = torch.zeros((), dtype=l_color.dtype)
    elif w_surface > 0:
        l_surf = surface_loss(fld, data.cloud_unit[idx])
    else:
        with torch.no_grad():
            l_surf = surface_loss(fld, data.cloud_unit[idx])

    breakdown = total_loss(l_color, l_surf, l_eik, LossWeights(w_surface, config.eikonal_weight))
    for name in ("color", "surface", "eikonal", "total"):
        if not torch.isfinite(getattr(breakdown, name)):
            raise TrainingAborted(f"non-finite {name} loss at iteration {state.iteration}")
    return breakdown, rejected


def training_step(state: TrainState, data: TrainData, config: TrainConfig) -> tuple[TrainState, IterationLog]:
    start = time.perf_counter()
    state.optimizer.zero_grad(set_to_none=True)
    breakdown, rejected = compute_losses(state, data, config)
    breakdown.total.backward()
    state.optimizer.step()
    state.scheduler.step()
    state.iteration += 1
    vals = breakdown.as_floats()
    entry = IterationLog(state.iteration, vals["color"], vals["surface"], vals["eikonal"], vals["total"],
                         float(state.field.kappa.detach()), (time.perf_counter() - start) * 1e3, rejected)
    return state, entry


@dataclass
class Checkpoint:
    field_config: FieldConfig
    state_dict: dict
    normalization: SceneNormalization
    train_config: TrainConfig
    iteration: int
    rng_state: dict = field(default_factory=dict)

    def build_field(self) -> SdfColorField:
        fld = SdfColorField(self.field_config)
        fld.load_state_dict(self.state_dict)
        fld.eval()
        return fld

    def to_bytes(self) -> bytes:
        payload = {
            "version": 1,
            "field_config": self.field_config.to_dict(),
            "state_dict": {k: v.clone() for k, v in self.state_dict.items()},
            "normalization": self.normalization.to_dict(),
            "train_config": self.train_config.to_dict(),
            "iteration": self.iteration,
            "rng_state": self.rng_state,
        }
        buf = io.BytesIO()
        torch.save(payload, buf)
        return CHECKPOINT_MAGIC + buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if blob[:8] != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint: bad magic header {blob[:8]!r}")
        payload = torch.load(io.BytesIO(blob[8:]), weights_only=True)
        if payload.get("version") != 1:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
        return cls(FieldConfig(**payload["field_config"]), payload["state_dict"],
                   SceneNormalization.from_dict(payload["normalization"]),
                   TrainConfig.from_dict(payload["train_config"]), int(payload["iteration"]),
                   payload["rng_state"])

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())


def snapshot(state: TrainState, data: TrainData, config: TrainConfig) -> Checkpoint:
    return Checkpoint(state.field.config, {k: v.detach().clone() for k, v in state.field.state_dict().items()},
                      data.normalization, config, state.iteration,
                      {"main": state.rng.bit_generator.state, "surface": state.surface_rng.bit_generator.state})


EvalHook = Callable[[int, SdfColorField, SceneNormalization], object]


def train(bundle: DatasetBundle, config: TrainConfig, out_dir=None,
          eval_hook: Optional[EvalHook] = None) -> tuple[Checkpoint, list[IterationLog]]:
    """Run ``config.iterations`` steps. Writes ``train_log.csv`` and checkpoints into ``out_dir`` if given."""
    data = TrainData.prepare(bundle, config)
    state = init_state(config, data.normalization)
    logs: list[IterationLog] = []
    out = Path(out_dir) if out_dir is not None else None
    log_file = writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_file = (out / "train_log.csv").open("w", newline="")
        writer = csv.writer(log_file)
        writer.writerow(LOG_COLUMNS)
    try:
        if eval_hook is not None and config.eval_every > 0:
            eval_hook(0, state.field, data.normalization)
        for _ in range(config.iterations):
            state, entry = training_step(state, data, config)
            it = state.iteration
            if it % config.log_every == 0 or it == config.iterations:
                logs.append(entry)
                if writer is not None:
                    writer.writerow(entry.row())
                    log_file.flush()
            if out is not None and config.checkpoint_every > 0 and it % config.checkpoint_every == 0:
                snapshot(state, data, config).save(out / f"checkpoint_{it:06d}.rsdf")
            if eval_hook is not None and config.eval_every > 0 and (
                    it % config.eval_every == 0 or it == config.iterations):
                eval_hook(it, state.field, data.normalization)
    finally:
        if log_file is not None:
            log_file.close()
    ckpt = snapshot(state, data, config)
    if out is not None:
        ckpt.save(out / "checkpoint.rsdf")
    return ckpt, logs


def read_log(path) -> list[IterationLog]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [IterationLog(int(r["iteration"]), float(r["color"]), float(r["surface"]), float(r["eikonal"]),
                             float(r["total"]), float(r["kappa"]), float(r["wall_ms"]), int(r["rays_rejected"]))
                for r in reader]
