"""Loss and F-score curves per run variant."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

Series = tuple[Sequence[float], Sequence[float]]


def plot_series(series: Mapping[str, Series], out_stem, xlabel: str, ylabel: str, title: str = "") -> list[Path]:
    """One line per named series; writes ``<out_stem>.png`` and ``<out_stem>.svg``."""
    if not series:
        raise ValueError("no series to plot")
    for name, (xs, ys) in series.items():
        if len(xs) < 2 or len(xs) != len(ys):
            raise ValueError(f"series {name!r} needs at least 2 matching (x, y) points")
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    for name, (xs, ys) in series.items():
        ax.plot(list(xs), list(ys), label=name, linewidth=1.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out_stem = Path(out_stem)
    paths = [out_stem.with_suffix(".png"), out_stem.with_suffix(".svg")]
    for p in paths:
        fig.savefig(p)
    plt.close(fig)
    return paths


def curve_and_plot(runs: Mapping[str, Mapping[str, Series]], out_dir) -> list[Path]:
    """``runs[variant]`` maps ``"loss"`` and/or ``"fscore"`` to ``(iterations, values)``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    labels = {"loss": "total loss", "fscore": "F-score (%)"}
    for key, ylabel in labels.items():
        series = {name: r[key] for name, r in runs.items() if key in r}
        if series:
            written += plot_series(series, out_dir / key, "iteration", ylabel)
    if not written:
        raise ValueError("no loss or fscore series supplied")
    return written
