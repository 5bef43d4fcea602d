"""Matplotlib figures written next to the delimited report outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import AnatomyClass  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # stable bytes across runs
    "svg.hashsalt": "autofb",
}

MEASUREMENT_ORDER = ("BPD", "OFD", "HC", "TAD", "APAD", "AC", "FL")


def _save(fig, path):
    fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
    plt.close(fig)


def error_boxplot(stats: dict, path) -> None:
    """Boxplots of absolute error per measurement from precomputed stats.

    Draws from the stored hinges and whiskers rather than recomputing, so the
    figure matches the JSON exactly.
    """
    names = [m for m in MEASUREMENT_ORDER if m in stats] + sorted(set(stats) - set(MEASUREMENT_ORDER))
    boxes = []
    for m in names:
        s = stats[m]
        boxes.append({
            "label": m, "med": s["median"], "q1": s["q1"], "q3": s["q3"],
            "whislo": s["whisker_low"], "whishi": s["whisker_high"], "fliers": s["outliers"],
        })
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(3.0, 0.8 * len(names) + 1.5), 3.2))
        if boxes:
            ax.bxp(boxes, showfliers=True, patch_artist=True,
                   boxprops={"facecolor": "#9ecae1", "edgecolor": "#3182bd"},
                   medianprops={"color": "#08519c"},
                   flierprops={"marker": "o", "markersize": 3, "markerfacecolor": "none"})
        ax.set_ylabel("absolute error (mm)")
        ax.set_title("Predicted vs clinical biometry")
        _save(fig, path)


def iou_bars(metrics: dict, path) -> None:
    per = metrics["per_class_iou"]
    labels = [c.short for c in AnatomyClass]
    vals = [per.get(k, np.nan) for k in labels]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.8))
        ax.bar(labels, vals, color=["#bdbdbd", "#6baed6", "#74c476", "#fd8d3c"])
        ax.axhline(metrics["miou"], color="k", lw=0.8, ls="--", label=f"mIoU {metrics['miou']:.3f}")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("IoU")
        ax.legend(frameon=False, loc="lower right")
        _save(fig, path)


def confusion_heatmap(confusion, path) -> None:
    conf = np.asarray(confusion, dtype=float)
    rows = conf.sum(axis=1, keepdims=True)
    frac = np.divide(conf, rows, out=np.zeros_like(conf), where=rows > 0)
    labels = [c.short for c in AnatomyClass]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.0))
        im = ax.imshow(frac, vmin=0, vmax=1, cmap="Blues")
        ax.set_xticks(range(4), labels)
        ax.set_yticks(range(4), labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("ground truth")
        for i in range(4):
            for j in range(4):
                ax.text(j, i, f"{frac[i, j]:.2f}", ha="center", va="center", fontsize=7,
                        color="white" if frac[i, j] > 0.5 else "black")
        fig.colorbar(im, ax=ax, fraction=0.046)
        _save(fig, path)
