"""SVG figures for evaluated runs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import ConfusionMatrix  # noqa: E402
from .training import History  # noqa: E402


def plot_confusion(cm: ConfusionMatrix, path: Path | str, title: str = "Confusion matrix") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    counts = cm.counts
    fig, ax = plt.subplots(figsize=(7, 6))
    image = ax.imshow(counts, cmap="Blues")
    fig.colorbar(image, ax=ax)
    ticks = np.arange(cm.n_classes)
    ax.set_xticks(ticks, labels=cm.labels)
    ax.set_yticks(ticks, labels=cm.labels)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    ax.set_title(title)
    threshold = counts.max() / 2.0 if counts.size else 0.0
    for i in range(cm.n_classes):
        for j in range(cm.n_classes):
            if counts[i, j]:
                color = "white" if counts[i, j] > threshold else "black"
                ax.text(j, i, str(counts[i, j]), ha="center", va="center", color=color, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_history(history: History, path: Path | str) -> Path:
    """Loss and accuracy curves side by side, best epoch marked."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    epochs = history.column("epoch")
    fig, (loss_ax, acc_ax) = plt.subplots(1, 2, figsize=(11, 4))
    loss_ax.plot(epochs, history.column("train_loss"), label="train")
    loss_ax.plot(epochs, history.column("val_loss"), label="validation")
    loss_ax.set_xlabel("epoch")
    loss_ax.set_ylabel("loss")
    acc_ax.plot(epochs, history.column("train_acc"), label="train")
    acc_ax.plot(epochs, history.column("val_acc"), label="validation")
    acc_ax.set_xlabel("epoch")
    acc_ax.set_ylabel("accuracy")
    acc_ax.set_ylim(0.0, 1.02)
    if history.best_epoch >= 0:
        for ax in (loss_ax, acc_ax):
            ax.axvline(history.best_epoch, color="grey", linestyle="--", linewidth=0.8)
    for ax in (loss_ax, acc_ax):
        ax.legend()
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


__all__ = ["plot_confusion", "plot_history"]
