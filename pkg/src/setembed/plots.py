"""Figure rendering for the CLI report paths.

All figures go out as self-contained SVG files next to the CSVs they
visualize. Output is deterministic: the SVG hash salt is pinned and no
timestamps are embedded, so identical runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CLASS_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple",
                "tab:brown", "tab:pink", "tab:gray", "tab:olive", "tab:cyan")

plt.rcParams["svg.hashsalt"] = "setembed"
_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def save_embedding_scatter(path, embeddings, labels, title=""):
    """2D scatter of embeddings, one marker per sample, colored by class."""
    fig, ax = plt.subplots(figsize=(5, 5))
    classes = sorted(set(int(v) for v in labels))
    for j in classes:
        mask = labels == j
        ax.scatter(embeddings[mask, 0], embeddings[mask, 1], s=18,
                   color=CLASS_COLORS[j % len(CLASS_COLORS)], label=f"id {j}")
    ax.set_xlabel("embedding[0]")
    ax.set_ylabel("embedding[1]")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_loss_curves(path, log):
    """Per-term loss values over iterations."""
    fig, ax = plt.subplots(figsize=(7, 4))
    iters = [r.iteration for r in log.iterations]
    series = [
        ("total", [r.loss_total for r in log.iterations]),
        ("softmax", [r.loss_softmax for r in log.iterations]),
        ("max_margin", [r.loss_maxmargin for r in log.iterations]),
        ("center", [r.loss_center for r in log.iterations]),
        ("pushing", [r.loss_pushing for r in log.iterations]),
    ]
    for name, values in series:
        if any(v != 0.0 for v in values) or name == "total":
            ax.plot(iters, values, label=name, linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_eval_curves(path, log):
    """Accuracy, AUC, and 100%-EER per epoch, one line each."""
    fig, ax = plt.subplots(figsize=(7, 4))
    epochs = [e.epoch for e in log.evals]
    ax.plot(epochs, [e.accuracy for e in log.evals], label="accuracy")
    ax.plot(epochs, [e.auc for e in log.evals], label="auc")
    ax.plot(epochs, [1.0 - e.eer for e in log.evals], label="100%-eer")
    ax.set_xlabel("epoch")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_mode_comparison(path, rows):
    """Grouped bars of accuracy/auc/100%-eer per update mode."""
    fig, ax = plt.subplots(figsize=(6, 4))
    modes = [row["mode"] for row in rows]
    metrics = [
        ("accuracy", [row["accuracy"] for row in rows]),
        ("auc", [row["auc"] for row in rows]),
        ("100%-eer", [1.0 - row["eer"] for row in rows]),
    ]
    width = 0.25
    for k, (name, values) in enumerate(metrics):
        positions = [i + (k - 1) * width for i in range(len(modes))]
        ax.bar(positions, values, width=width, label=name)
    ax.set_xticks(range(len(modes)))
    ax.set_xticklabels(modes)
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
