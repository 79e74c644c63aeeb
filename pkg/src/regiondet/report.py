"""Matplotlib figures rendered next to the delimited outputs."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .data import Dataset
from .synth import GroundTruth


def save_dataset_figures(dataset: Dataset, truth: GroundTruth | None, out_dir) -> list[str]:
    """Scatter of the location layout plus a few example series."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(6, 6))
    if truth is not None and truth.region_members:
        for name in sorted(truth.region_members):
            pts = np.array([dataset.locations[m] for m in truth.region_members[name]])
            ax.scatter(pts[:, 0], pts[:, 1], s=14, label=name)
        ax.legend(loc="upper right", fontsize=8)
    else:
        pts = np.array(list(dataset.locations.values()))
        ax.scatter(pts[:, 0], pts[:, 1], s=14)
    ax.set_title("location layout")
    ax.set_aspect("equal")
    path = os.path.join(out_dir, "layout.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(9, 4))
    slots = list(dataset.slots)
    shown = 0
    if truth is not None and truth.region_members:
        sample = [members[0] for _, members in sorted(truth.region_members.items()) if members]
    else:
        sample = list(dataset.locations)[:4]
    for loc in sample[:4]:
        series = []
        for s in dataset.slices:
            try:
                k = s.ids.index(loc)
            except ValueError:
                series.append(np.nan)
                continue
            series.append(float(s.values[k]))
        ax.plot(slots, series, lw=0.6, label=loc)
        shown += 1
    if truth is not None:
        for a in truth.anomalies:
            ax.axvspan(a.t_start, a.t_end, color="tab:red", alpha=0.08, lw=0)
    if shown:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("slot")
    ax.set_ylabel("reading")
    ax.set_title("example series (anomaly intervals shaded)")
    path = os.path.join(out_dir, "series.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written


def save_metrics_figure(metrics: dict, out_dir, name: str = "metrics.png") -> str:
    """Bar chart of precision / recall / F1 / external overlap for one run."""
    os.makedirs(out_dir, exist_ok=True)
    keys = ["precision", "recall", "f1", "external_overlap_ratio"]
    vals = [float(metrics.get(k, 0.0)) for k in keys]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(range(len(keys)), vals, color="tab:blue")
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(["precision", "recall", "F1", "ext. overlap"], fontsize=9)
    ax.set_ylim(0, 1.05)
    for b, v in zip(bars, vals):
        ax.text(b.get_x() + b.get_width() / 2, v + 0.02, f"{v:.3f}",
                ha="center", fontsize=8)
    ax.set_title("evaluation metrics")
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def save_benchmark_figure(summary: dict, out_dir, name: str = "benchmark.png") -> str:
    """Grouped bars comparing methods on F1 and external overlap."""
    os.makedirs(out_dir, exist_ok=True)
    methods = list(summary)
    x = np.arange(len(methods))
    f1 = [summary[m]["f1"] for m in methods]
    ratio = [summary[m]["external_overlap_ratio"] for m in methods]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(x - 0.2, f1, width=0.4, label="F1")
    ax.bar(x + 0.2, ratio, width=0.4, label="external overlap")
    ax.set_xticks(x)
    ax.set_xticklabels(methods)
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("detector comparison")
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path
