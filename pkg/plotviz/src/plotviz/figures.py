"""The six report figure types.

Each builder takes the run directory and returns a matplotlib Figure;
:func:`render_report` writes them as image files with fixed names.
Loss and error axes are log-scaled throughout.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, mu_columns, read_csv, require_columns


def fig_chosen_params(indir):
    """Scatter of the greedily selected parameter values."""
    path = Path(indir) / "chosen_params.csv"
    cols = require_columns(read_csv(path), ["round"], path)
    mus = mu_columns(cols)
    if not mus:
        raise SchemaError(f"{path.name}: missing column 'mu1'")
    fig = plt.figure(figsize=(5, 4))
    rounds = cols["round"]
    if len(mus) >= 3:
        ax = fig.add_subplot(projection="3d")
        sc = ax.scatter(cols[mus[0]], cols[mus[1]], cols[mus[2]], c=rounds, cmap="viridis")
        ax.set_zlabel(mus[2])
        fig.colorbar(sc, ax=ax, label="round", shrink=0.7)
    elif len(mus) == 2:
        ax = fig.add_subplot()
        sc = ax.scatter(cols[mus[0]], cols[mus[1]], c=rounds, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="round")
    else:
        ax = fig.add_subplot()
        ax.scatter(rounds, cols[mus[0]])
        ax.set_xlabel("round")
    ax.set_xlabel("round" if len(mus) == 1 else mus[0])
    if len(mus) > 1:
        ax.set_ylabel(mus[1])
    else:
        ax.set_ylabel(mus[0])
    ax.set_title("selected parameter values")
    return fig


def fig_indicator_decay(indir):
    """Worst-case indicator against the number of hidden neurons."""
    path = Path(indir) / "chosen_params.csv"
    cols = require_columns(read_csv(path), ["round", "max_indicator"], path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(cols["round"], cols["max_indicator"], "o-")
    ax.set_xlabel("neurons")
    ax.set_ylabel("worst-case training loss")
    ax.set_title("indicator decay")
    ax.grid(True, which="both", alpha=0.3)
    return fig


def fig_indicator_boxes(indir):
    """Box-and-whisker plot of the full indicator tables per round."""
    indir = Path(indir)
    files = sorted(indir.glob("indicator_scan_round_*.csv"),
                   key=lambda p: int(re.search(r"_(\d+)\.csv$", p.name).group(1)))
    if not files:
        raise SchemaError("indicator_scan_round_*.csv: no files found")
    tables, labels = [], []
    for path in files:
        cols = require_columns(read_csv(path), ["delta"], path)
        tables.append(cols["delta"])
        labels.append(re.search(r"_(\d+)\.csv$", path.name).group(1))
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.boxplot(tables, tick_labels=labels)
    ax.set_yscale("log")
    ax.set_xlabel("neurons")
    ax.set_ylabel("training loss over the scan")
    ax.set_title("indicator distribution per round")
    return fig


def fig_loss_curves(indir):
    """Training-loss histories against epochs."""
    indir = Path(indir)
    files = sorted(indir.glob("loss_history*.csv"))
    if not files:
        raise SchemaError("loss_history*.csv: no files found")
    fig, ax = plt.subplots(figsize=(5, 4))
    for path in files:
        cols = require_columns(read_csv(path), ["epoch", "loss"], path)
        label = path.stem.replace("loss_history", "").strip("_") or "run"
        ax.semilogy(cols["epoch"], cols["loss"], label=label, lw=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("training loss")
    if len(files) <= 12:
        ax.legend(fontsize=7)
    return fig


def fig_error_heatmap(indir):
    """Point-wise absolute error over the space-time grid."""
    path = Path(indir) / "pointwise_error.csv"
    cols = require_columns(read_csv(path), ["x", "t", "abs_error"], path)
    xs = np.unique(cols["x"])
    ts = np.unique(cols["t"])
    fig, ax = plt.subplots(figsize=(5, 4))
    if xs.size * ts.size == cols["abs_error"].size:
        order = np.lexsort((cols["t"], cols["x"]))
        grid = cols["abs_error"][order].reshape(xs.size, ts.size)
        pm = ax.pcolormesh(ts, xs, grid, shading="nearest", cmap="magma")
    else:
        pm = ax.scatter(cols["t"], cols["x"], c=cols["abs_error"], s=4, cmap="magma")
    fig.colorbar(pm, ax=ax, label="|error|")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title("point-wise absolute error")
    return fig


def fig_runtime(indir):
    """Cumulative cost of repeated full solves versus the surrogate."""
    path = Path(indir) / "timing.csv"
    cols = require_columns(read_csv(path), ["q", "full_cum_s", "gpt_cum_s"], path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(cols["q"], cols["full_cum_s"], label="full network per query")
    ax.plot(cols["q"], cols["gpt_cum_s"], label="surrogate (incl. offline)")
    cross = np.flatnonzero(cols["gpt_cum_s"] <= cols["full_cum_s"])
    if cross.size:
        ax.axvline(cols["q"][cross[0]], ls=":", color="gray", lw=1)
    ax.set_xlabel("queries")
    ax.set_ylabel("cumulative wall time [s]")
    ax.set_title("cumulative run time")
    ax.legend(fontsize=8)
    return fig


FIGURES = {
    "chosen-params": (fig_chosen_params, "chosen_params.png"),
    "indicator-decay": (fig_indicator_decay, "indicator_decay.png"),
    "indicator-boxes": (fig_indicator_boxes, "indicator_boxes.png"),
    "loss-curves": (fig_loss_curves, "loss_curves.png"),
    "error-heatmap": (fig_error_heatmap, "error_heatmap.png"),
    "runtime": (fig_runtime, "runtime.png"),
}


@dataclass
class ReportSpec:
    indir: str
    outdir: str
    figures: list = field(default_factory=lambda: list(FIGURES))
    image_format: str = "png"

    def __post_init__(self):
        unknown = [f for f in self.figures if f not in FIGURES]
        if unknown:
            raise ValueError(f"unknown figure kinds: {unknown}; choose from {sorted(FIGURES)}")


def render_report(spec: ReportSpec):
    """Render the selected figures; returns the written image paths."""
    outdir = Path(spec.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in spec.figures:
        builder, default_name = FIGURES[kind]
        fig = builder(spec.indir)
        name = Path(default_name).with_suffix("." + spec.image_format)
        target = outdir / name
        fig.savefig(target, dpi=110)
        plt.close(fig)
        written.append(target)
    return written
