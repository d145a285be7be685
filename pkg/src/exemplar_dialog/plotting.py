"""Report figures, rendered off-screen with the Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics.report import METRIC_ROWS  # noqa: E402

# Fixed metadata keeps PNG bytes stable between runs.
_PNG_META = {"Software": None}


def training_curves(histories: Mapping, path: str | Path) -> Path:
    """Train and dev loss per epoch, one colour per architecture."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (arch, hist) in enumerate(sorted(histories.items())):
        epochs = [e["epoch"] for e in hist.epochs]
        color = f"C{i}"
        ax.plot(epochs, hist.train_losses, color=color, linestyle="--", label=f"{arch} train")
        ax.plot(epochs, hist.dev_losses, color=color, marker="o", markersize=3, label=f"{arch} dev")
        if hist.best_epoch:
            ax.axvline(hist.best_epoch, color=color, alpha=0.3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy")
    ax.set_title("Training curves")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def _scaled(metric: str, value: float) -> float:
    # BLEU and greedy matching are shown on the x100 scale used by the published table,
    # cosines on [0, 100] so every panel shares an axis
    if metric in ("inform", "request"):
        return value
    return 100.0 * value


def metric_bars(reports: Mapping, targets: Mapping, path: str | Path) -> Path:
    """Measured metrics per architecture next to the published reference values."""
    path = Path(path)
    fig, axes = plt.subplots(1, len(METRIC_ROWS), figsize=(3 * len(METRIC_ROWS), 3.5))
    archs = list(reports)
    for ax, (key, label) in zip(axes, METRIC_ROWS):
        xs = range(len(archs))
        measured = [_scaled(key, getattr(reports[a], key)) for a in archs]
        ax.bar([x - 0.2 for x in xs], measured, width=0.4, label="measured")
        published = [targets.get(a, {}).get(key) for a in archs]
        if any(p is not None for p in published):
            shown = [0.0 if p is None else (p if key in ("bleu", "greedy_matching", "inform", "request")
                                             else 100.0 * p) for p in published]
            ax.bar([x + 0.2 for x in xs], shown, width=0.4, label="published", alpha=0.6)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(archs)
        ax.set_title(label, fontsize=9)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path
