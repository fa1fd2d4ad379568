"""Figure rendering for benchmark reports (file output only).

Uses the Agg backend so reports render identically headless; nothing here
opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import PointCloud, RigidTransform, apply_transform
from .metrics import MetricReport


def render_metric_bars(rows: list[tuple[str, MetricReport]], path) -> Path:
    """Grouped log-scale bars: rotation metrics left, translation right."""
    names = [name for name, _ in rows]
    rot = np.array([[r.mse_r, r.rmse_r, r.mae_r] for _, r in rows])
    tra = np.array([[r.mse_t, r.rmse_t, r.mae_t] for _, r in rows])

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    labels = ["MSE", "RMSE", "MAE"]
    x = np.arange(len(labels))
    width = 0.8 / max(len(names), 1)
    for k, name in enumerate(names):
        axes[0].bar(x + k * width, np.maximum(rot[k], 1e-12), width, label=name)
        axes[1].bar(x + k * width, np.maximum(tra[k], 1e-12), width, label=name)
    for ax, title in zip(axes, ["rotation (deg)", "translation"]):
        ax.set_yscale("log")
        ax.set_xticks(x + width * (len(names) - 1) / 2)
        ax.set_xticklabels(labels)
        ax.set_title(title)
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_alignment(source: PointCloud, target: PointCloud,
                     transform: RigidTransform | None, path,
                     title: str = "") -> Path:
    """Before/after scatter of the two clouds, aligned set shifted right."""
    fig = plt.figure(figsize=(8, 4))
    for col, (t, label) in enumerate(
            [(None, "input"), (transform, "aligned")]):
        ax = fig.add_subplot(1, 2, col + 1, projection="3d")
        src = source if t is None else apply_transform(t, source)
        ax.scatter(*src.points.T, s=2, c="tab:orange", label="source")
        ax.scatter(*target.points.T, s=2, c="tab:blue", label="target")
        ax.set_title(label if t is not None or col == 0 else "no estimate")
        ax.set_axis_off()
        ax.legend(fontsize=7, loc="upper right")
        if col == 1 and t is None:
            ax.set_title("no estimate (failed)")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
