"""Training variants with and without the radar-guided strategies, evaluated along the way."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .evalkit import MetricReport, curve_and_plot, evaluate_field, evaluation_box, write_reports
from .forge import DatasetBundle
from .trainer import Checkpoint, IterationLog, TrainConfig, train

# name -> TrainConfig overrides; "image-only" drops every use of the radar cloud
VARIANTS = {
    "full": {},
    "w/o rs": {"radar_fraction": 0.0},
    "w/o bd": {"use_bounds": False},
    "w/o both": {"radar_fraction": 0.0, "use_bounds": False},
    "image-only": {"surface_weight": 0.0, "radar_fraction": 0.0, "use_bounds": False},
}
ABLATION = ("full", "w/o rs", "w/o bd", "w/o both")


def variant_config(config: TrainConfig, name: str) -> TrainConfig:
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return replace(config, **VARIANTS[name])


@dataclass(frozen=True)
class EvalSettings:
    grid: int = 96            # marching-cubes cells per axis during training
    final_grid: int = 256
    samples: int = 100_000
    tau_cm: float = 100.0


@dataclass
class VariantRun:
    name: str
    config: TrainConfig
    checkpoint: Checkpoint
    logs: list[IterationLog]
    curve: list[tuple[int, MetricReport]] = field(default_factory=list)
    final: Optional[MetricReport] = None

    def fscore_series(self) -> tuple[list[int], list[float]]:
        return [it for it, _ in self.curve], [r.fscore for _, r in self.curve]

    def loss_series(self) -> tuple[list[int], list[float]]:
        return [e.iteration for e in self.logs], [e.total for e in self.logs]


def run_variant(bundle: DatasetBundle, config: TrainConfig, name: str, settings: EvalSettings = EvalSettings(),
                out_dir=None) -> VariantRun:
    """Train one variant; F-score is tracked every ``config.eval_every`` iterations at ``settings.grid``."""
    cfg = variant_config(config, name)
    box = evaluation_box(bundle)
    curve: list[tuple[int, MetricReport]] = []

    def hook(it, fld, norm):
        report, _ = evaluate_field(fld, norm, bundle.mesh, box, settings.grid, settings.samples, settings.tau_cm)
        curve.append((it, report))

    ckpt, logs = train(bundle, cfg, out_dir, eval_hook=hook if cfg.eval_every > 0 else None)
    final, _ = evaluate_field(ckpt.build_field(), ckpt.normalization, bundle.mesh, box, settings.final_grid,
                              settings.samples, settings.tau_cm)
    return VariantRun(name, cfg, ckpt, logs, curve, final)


def slug(name: str) -> str:
    return name.replace("/", "").replace(" ", "_")


def write_comparison(runs: list[VariantRun], out_dir) -> list[Path]:
    """One report row per variant plus loss and F-score curves."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_reports([{"variant": r.name, "iterations": r.checkpoint.iteration, **r.final.row()} for r in runs],
                  out_dir / "reports.csv")
    series = {}
    for r in runs:
        entry = {}
        if len(r.logs) >= 2:
            entry["loss"] = r.loss_series()
        if len(r.curve) >= 2:
            entry["fscore"] = r.fscore_series()
        series[r.name] = entry
    written = [out_dir / "reports.csv"]
    if any(series.values()):
        written += curve_and_plot(series, out_dir / "curves")
    return written


def run_ablation(bundle: DatasetBundle, config: TrainConfig, settings: EvalSettings = EvalSettings(),
                 out_dir=None, variants=ABLATION) -> list[VariantRun]:
    runs = []
    for name in variants:
        sub = Path(out_dir) / slug(name) if out_dir is not None else None
        runs.append(run_variant(bundle, config, name, settings, sub))
    if out_dir is not None:
        write_comparison(runs, out_dir)
    return runs
