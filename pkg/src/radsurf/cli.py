"""Command-line entry point: ``radsurf {forge,train,mesh,eval,ablate}``.

All commands read one INI file with ``[forge]``, ``[train]``, ``[field]`` and
``[eval]`` sections. Keys mirror the corresponding dataclass fields; unknown
sections or keys are rejected. Command-line flags override file values.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .ablation import ABLATION, EvalSettings, run_ablation
from .evalkit import evaluate, evaluation_box, extract_mesh, tau_from_diagonal, write_reports
from .field import FieldConfig
from .forge import (BundleError, CameraTemplate, RadarSimSpec, SceneSpec, TrajectorySpec, forge_bundle, load_bundle,
                    save_bundle)
from .forge.bundle import write_ply
from .geometry import Aabb
from .trainer import Checkpoint, TrainConfig, TrainingAborted, train

log = logging.getLogger("radsurf")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ForgeConfig:
    seed: int = 0
    boxes: int = 4
    ground_extent: float = 100.0
    min_height: float = 8.0
    max_height: float = 30.0
    min_size: float = 12.0
    max_size: float = 24.0
    views: int = 5
    radius: float = 120.0
    altitude: float = 120.0
    span_deg: float = 40.0
    heading_deg: float = 0.0
    width: int = 128
    height: int = 128
    fov_deg: float = 40.0
    density: float = 0.5
    emphasis: float = 3.0
    noise_sigma: float = 0.0
    visibility: bool = True

    def build(self):
        scene = SceneSpec.random(self.boxes, self.ground_extent, (self.min_height, self.max_height),
                                 (self.min_size, self.max_size), seed=self.seed)
        traj = TrajectorySpec(radius=self.radius, altitude=self.altitude, span_deg=self.span_deg,
                              view_count=self.views, heading_deg=self.heading_deg)
        template = CameraTemplate(self.width, self.height, self.fov_deg)
        radar = RadarSimSpec(density=self.density, emphasis=self.emphasis, noise_sigma=self.noise_sigma,
                             visibility=self.visibility, seed=self.seed)
        return forge_bundle(scene, traj, template, radar)


@dataclass(frozen=True)
class EvalConfig:
    grid: int = 96
    final_grid: int = 256
    samples: int = 100_000
    tau_cm: float = 100.0
    tau_fraction: float = 0.0  # > 0: threshold is this fraction of the scene diagonal, overriding tau_cm

    def settings(self, bundle=None) -> EvalSettings:
        tau = self.tau_cm
        if self.tau_fraction > 0:
            if bundle is None:
                raise ConfigError("tau_fraction needs a bundle")
            tau = tau_from_diagonal(bundle, self.tau_fraction)
        return EvalSettings(self.grid, self.final_grid, self.samples, tau)


@dataclass
class Settings:
    forge: ForgeConfig
    train: TrainConfig
    eval: EvalConfig


_SECTIONS = {"forge": ForgeConfig, "train": TrainConfig, "field": FieldConfig, "eval": EvalConfig}
_SKIP = {"train": {"field"}, "field": {"scene_scale"}}


def _parse_value(section: configparser.SectionProxy, key: str, default):
    try:
        if isinstance(default, bool):
            return section.getboolean(key)
        if isinstance(default, int):
            return section.getint(key)
        if isinstance(default, float):
            return section.getfloat(key)
        return section.get(key)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: {exc}") from exc


def load_settings(path: Optional[Path] = None) -> Settings:
    parser = configparser.ConfigParser()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(parser.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    values = {}
    for name, cls in _SECTIONS.items():
        known = {f.name: f.default for f in fields(cls) if f.name not in _SKIP.get(name, ())}
        kwargs = {}
        if parser.has_section(name):
            for key in parser[name]:
                if key not in known:
                    raise ConfigError(f"unknown key [{name}] {key}")
                kwargs[key] = _parse_value(parser[name], key, known[key])
        try:
            values[name] = cls(**kwargs) if name != "train" else kwargs
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}] {exc}") from exc
    try:
        train_cfg = TrainConfig(field=values["field"], **values["train"])
    except ValueError as exc:
        raise ConfigError(f"[train] {exc}") from exc
    return Settings(values["forge"], train_cfg, values["eval"])


def _train_overrides(cfg: TrainConfig, args) -> TrainConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "iters", None) is not None:
        cfg = replace(cfg, iterations=args.iters)
    if getattr(args, "lam", None) is not None:
        cfg = replace(cfg, radar_fraction=args.lam)
    if getattr(args, "no_radar", False):
        cfg = cfg.image_only()
    return cfg


def _eval_overrides(cfg: EvalConfig, args) -> EvalConfig:
    if getattr(args, "grid", None) is not None:
        cfg = replace(cfg, final_grid=args.grid)
    return cfg


def cmd_forge(args, settings: Settings) -> int:
    fc = settings.forge
    if args.seed is not None:
        fc = replace(fc, seed=args.seed)
    bundle = fc.build()
    out = save_bundle(bundle, args.out)
    lo, hi = bundle.metadata["scene_min"], bundle.metadata["scene_max"]
    print(f"bundle {out}: {len(bundle.images)} views, {len(bundle.cloud)} radar points, "
          f"scene extent {[round(h - l, 3) for l, h in zip(lo, hi)]} m")
    return 0


def cmd_train(args, settings: Settings) -> int:
    bundle = load_bundle(args.bundle)
    cfg = _train_overrides(settings.train, args)
    ckpt, logs = train(bundle, cfg, args.out)
    last = logs[-1] if logs else None
    summary = f"trained {cfg.iterations} iterations -> {Path(args.out) / 'checkpoint.rsdf'}"
    if last is not None:
        summary += f" (final total loss {last.total:.4f}, color {last.color:.4f}, kappa {last.kappa:.1f})"
    print(summary)
    return 0


def cmd_mesh(args, settings: Settings) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    grid = args.grid if args.grid is not None else settings.eval.final_grid
    if args.bundle is not None:
        box = ckpt.normalization.box_to_unit(evaluation_box(load_bundle(args.bundle)))
    else:
        box = Aabb.cube(1.0)
    mesh = extract_mesh(ckpt.build_field(), box, grid, ckpt.normalization)
    if mesh.is_empty:
        raise ValueError("the field has no zero crossing inside the extraction box")
    write_ply(mesh, args.out)
    print(f"mesh {args.out}: {len(mesh.vertices)} vertices, {len(mesh.faces)} faces at grid {grid}")
    return 0


def cmd_eval(args, settings: Settings) -> int:
    bundle = load_bundle(args.bundle)
    ckpt = Checkpoint.load(args.checkpoint)
    es = _eval_overrides(settings.eval, args).settings(bundle)
    report = evaluate(ckpt, bundle, es.final_grid, es.samples, es.tau_cm)
    print(f"CD-l1 {report.cd_l1:.2f} cm  precision {report.precision:.2f}  recall {report.recall:.2f}  "
          f"F {report.fscore:.2f}  (tau {report.tau:.1f} cm{', EMPTY MESH' if report.empty_mesh else ''})")
    if args.out is not None:
        write_reports([{"checkpoint": str(args.checkpoint), **report.row()}], args.out)
    return 0


def cmd_ablate(args, settings: Settings) -> int:
    bundle = load_bundle(args.bundle)
    cfg = _train_overrides(settings.train, args)
    es = _eval_overrides(settings.eval, args).settings(bundle)
    runs = run_ablation(bundle, cfg, es, args.out, ABLATION)
    for r in runs:
        print(f"{r.name:10s} F {r.final.fscore:6.2f}  P {r.final.precision:6.2f}  R {r.final.recall:6.2f}  "
              f"CD {r.final.cd_l1:8.2f} cm")
    print(f"reports and curves written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radsurf", description="Radar-guided neural surface reconstruction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", type=Path, help="INI config file")
        if seed:
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("forge", help="build a synthetic dataset bundle")
    common(sp)
    sp.add_argument("--out", type=Path, required=True, help="bundle directory")
    sp.set_defaults(func=cmd_forge)

    for name, func, helptext in (("train", cmd_train, "train a field on a bundle"),
                                 ("ablate", cmd_ablate, "train and compare the four ablation variants")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("bundle", type=Path)
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--iters", type=int)
        sp.add_argument("--lambda", dest="lam", type=float, help="radar ray fraction")
        if name == "train":
            sp.add_argument("--no-radar", action="store_true", help="image-only baseline")
        else:
            sp.add_argument("--grid", type=int, help="final marching-cubes resolution")
        sp.set_defaults(func=func)

    sp = sub.add_parser("mesh", help="extract a mesh from a checkpoint")
    common(sp, seed=False)
    sp.add_argument("checkpoint", type=Path)
    sp.add_argument("--out", type=Path, required=True, help="output .ply")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--bundle", type=Path, help="crop to this bundle's evaluation box")
    sp.set_defaults(func=cmd_mesh)

    sp = sub.add_parser("eval", help="score a checkpoint against a bundle's ground truth")
    common(sp, seed=False)
    sp.add_argument("checkpoint", type=Path)
    sp.add_argument("bundle", type=Path)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--out", type=Path, help="optional report .csv")
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = load_settings(args.config)
        return args.func(args, settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BundleError, TrainingAborted, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
