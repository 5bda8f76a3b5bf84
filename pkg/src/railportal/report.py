"""Evaluation and thermal report rendering.

Writes the delimited metric tables consumed by scripts plus matplotlib
figures for human review.  Figures carry no volatile metadata, so report
trees are byte-identical across reruns of the same inputs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .thermal import Alarm, BlockStats
from .wagonid import MetricRow, SegmentationMetrics

# strip the Software tag so PNG bytes depend only on the plotted data
_PNG_META = {"metadata": {"Software": None}}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=110, **_PNG_META)
    plt.close(fig)


def write_metrics_csv(metrics: SegmentationMetrics, labels: list[str],
                      path: str | Path) -> None:
    """Accuracy / FN rate / FP rate rows, one per image plus totals,
    for character-level and full-identifier counting."""
    if len(labels) != len(metrics.per_image_char):
        raise ValueError("one label per evaluated image required")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "level", "tp", "fn", "fp",
                         "accuracy", "fn_rate", "fp_rate"])
        for label, char, full in zip(labels, metrics.per_image_char,
                                     metrics.per_image_full):
            writer.writerow(_row(label, "char", char))
            writer.writerow(_row(label, "full-id", full))
        writer.writerow(_row("TOTAL", "char", metrics.char))
        writer.writerow(_row("TOTAL", "full-id", metrics.full_id))


def _row(label: str, level: str, m: MetricRow) -> list:
    return [label, level, m.tp, m.fn, m.fp,
            f"{m.accuracy:.1f}", f"{m.fn_rate:.1f}", f"{m.fp_rate:.1f}"]


def render_segmentation_figures(metrics: SegmentationMetrics, labels: list[str],
                                out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    groups = ["Accuracy", "FN rate", "FP rate"]
    char_vals = [metrics.char.accuracy, metrics.char.fn_rate, metrics.char.fp_rate]
    full_vals = [metrics.full_id.accuracy, metrics.full_id.fn_rate,
                 metrics.full_id.fp_rate]
    x = np.arange(3)
    ax.bar(x - 0.18, char_vals, width=0.36, label="characters")
    ax.bar(x + 0.18, full_vals, width=0.36, label="full identifier")
    ax.set_xticks(x, groups)
    ax.set_ylabel("percent")
    ax.set_title("Identifier segmentation")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    p = out_dir / "segmentation_summary.png"
    _save(fig, p)
    paths.append(p)

    if metrics.per_image_char:
        fig, ax = plt.subplots(figsize=(7, 3.2))
        acc = [m.accuracy for m in metrics.per_image_char]
        ax.plot(range(len(acc)), acc, marker="o", markersize=3, linewidth=1)
        ax.set_xlabel("image")
        ax.set_ylabel("character accuracy (%)")
        ax.set_ylim(0, 105)
        ax.grid(alpha=0.3)
        p = out_dir / "per_image_accuracy.png"
        _save(fig, p)
        paths.append(p)
    return paths


def render_pantograph_figure(found_flags: list[bool], present_flags: list[bool],
                             out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tp = sum(f and p for f, p in zip(found_flags, present_flags))
    fn = sum((not f) and p for f, p in zip(found_flags, present_flags))
    fp = sum(f and (not p) for f, p in zip(found_flags, present_flags))
    tn = sum((not f) and (not p) for f, p in zip(found_flags, present_flags))
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(["TP", "FN", "FP", "TN"], [tp, fn, fp, tn],
           color=["#2a7", "#d55", "#d95", "#579"])
    ax.set_title("Apparatus detection outcomes")
    ax.set_ylabel("sequences")
    ax.grid(axis="y", alpha=0.3)
    p = out_dir / "pantograph_outcomes.png"
    _save(fig, p)
    return p


def render_thermal_figure(stats: BlockStats, alarms: list[Alarm],
                          threshold_c: float, out_path: str | Path) -> Path:
    """Block-max heatmap with alarm blocks outlined."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(8, 3))
    im = ax.imshow(stats.max, aspect="auto", cmap="inferno",
                   interpolation="nearest")
    for alarm in alarms:
        ax.add_patch(plt.Rectangle((alarm.block_col - 0.5, alarm.block_row - 0.5),
                                   1, 1, fill=False, edgecolor="#0ff",
                                   linewidth=1.2))
    fig.colorbar(im, ax=ax, label="block max (C)")
    ax.set_title(f"Block maxima, alarm threshold {threshold_c:g} C")
    ax.set_xlabel("block column")
    ax.set_ylabel("block row")
    _save(fig, out_path)
    return out_path
