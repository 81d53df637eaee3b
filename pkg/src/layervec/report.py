"""Figure rendering for reports: dataset histograms and fit loss curves.

Figures are written to files next to the delimited output; the Agg backend
keeps this headless-safe.
"""

from __future__ import annotations

from pathlib import Path as FsPath

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .svg_io import DatasetStats


def save_stats_figure(stats: DatasetStats, out_path: str | FsPath) -> None:
    """Three-panel histogram figure: paths per clipart, curves per path,
    curve type counts."""
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    panels = [
        ("paths per clipart", stats.paths_per_clipart),
        ("curves per path", stats.curves_per_path),
    ]
    for ax, (title, hist) in zip(axes[:2], panels):
        keys = sorted(hist)
        ax.bar(keys, [hist[k] for k in keys], color="#4878a8")
        ax.set_title(title)
        ax.set_xlabel("count")
        ax.set_ylabel("documents" if title.startswith("paths") else "paths")
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
    ax = axes[2]
    names = list(stats.curve_type_counts)
    values = [stats.curve_type_counts[n] for n in names]
    ax.bar(names, values, color=["#4878a8", "#a85448", "#999999"][: len(names)])
    ax.set_title("curve types")
    ax.set_ylabel("curves")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def save_loss_figure(traces: list[list[dict]], out_path: str | FsPath) -> None:
    """Per-layer optimization curves (total loss vs step, log scale)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i, steps in enumerate(traces):
        if not steps:
            continue
        xs = [row["step"] for row in steps]
        ys = [max(row["total"], 1e-12) for row in steps]
        ax.plot(xs, ys, label=f"layer {i}")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    if any(traces):
        ax.legend(fontsize=8)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
