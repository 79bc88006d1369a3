"""Report figures. Uses the object-oriented matplotlib API so no GUI backend is touched."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure
from matplotlib.ticker import MaxNLocator

GOLDEN = (math.sqrt(5) - 1.0) / 2.0


def _figure(width=6.4, height=None, ncols=1):
    fig = Figure(figsize=(width, height or width * GOLDEN), dpi=110, layout="constrained")
    axes = fig.subplots(1, ncols)
    return fig, axes


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    return path


def plot_training(records, path) -> Path:
    """Loss and validation macro-F1 per epoch, with stage boundaries shaded."""
    fig, (ax_loss, ax_f1) = _figure(9.0, 3.4, ncols=2)
    epochs = [r.epoch for r in records]
    ax_loss.plot(epochs, [r.mean_loss for r in records], marker="o", ms=3)
    ax_f1.plot(epochs, [r.val_macro_f1 for r in records], marker="o", ms=3, color="C1")
    starts = [r for i, r in enumerate(records) if i == 0 or records[i - 1].stage != r.stage]
    for ax in (ax_loss, ax_f1):
        for k, r in enumerate(starts):
            if k % 2 == 0:
                stop = starts[k + 1].epoch if k + 1 < len(starts) else records[-1].epoch + 1
                ax.axvspan(r.epoch - 0.5, stop - 0.5, color="0.92", lw=0)
        ax.set_xlabel("epoch")
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax_loss.set_ylabel("mean BCE loss")
    ax_f1.set_ylabel("validation macro-F1")
    ax_f1.set_ylim(0, 1.02)
    for r in starts:
        ax_f1.annotate(f"p={r.compound_proportion:g}", (r.epoch - 0.4, 0.05), fontsize=7)
    return _save(fig, path)


def plot_sweep(summary, runs, path, title="sweep") -> Path:
    """Mean macro-F1 per experiment with the individual seeds overlaid."""
    fig, ax = _figure(6.4)
    labels = [str(row["exp"]) for row in summary]
    means = [row["macro_f1"] for row in summary]
    x = np.arange(len(summary))
    ax.bar(x, means, color="C0", alpha=0.6, width=0.6)
    for i, row in enumerate(summary):
        scores = [r.macro_f1 for r in runs if r.exp == row["exp"] and not r.error]
        ax.scatter(np.full(len(scores), i), scores, color="k", s=10, zorder=3)
        if not math.isnan(row["macro_f1"]):
            ax.annotate(f"{row['macro_f1']:.4f}", (i, row["macro_f1"]), ha="center",
                        va="bottom", fontsize=7, xytext=(0, 3), textcoords="offset points")
    ax.set_xticks(x, [f"{lab}\n{row['epoch_dis']}" for lab, row in zip(labels, summary)], fontsize=7)
    ax.set_ylabel("macro-F1 (7 compound classes)")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    return _save(fig, path)


def plot_confusion(metrics, path) -> Path:
    fig, ax = _figure(5.6, 5.0)
    cm = np.asarray(metrics.confusion)
    ax.imshow(cm, cmap="Blues")
    for (i, j), v in np.ndenumerate(cm):
        ax.text(j, i, str(v), ha="center", va="center", fontsize=7,
                color="white" if v > cm.max() / 2 else "black")
    short = [n.replace("Surprised", "Surp.").replace("Sadly", "Sad.") for n in metrics.names]
    ax.set_xticks(range(len(short)), short, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(short)), short, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"macro-F1 {metrics.macro_f1:.4f}")
    return _save(fig, path)
