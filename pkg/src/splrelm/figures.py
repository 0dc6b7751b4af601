"""Figure rendering for CLI reports. Pure file output, no interactive
backend required; every helper writes one PNG and returns its path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return str(out_path)


def accuracy_bars(results: list[dict], out_path) -> str:
    """Grouped train/test accuracy bars, one group per model variant.

    Each result dict needs 'label', 'train_accuracy', 'test_accuracy'.
    """
    labels = [r["label"] for r in results]
    train = [100.0 * r["train_accuracy"] for r in results]
    test = [100.0 * r["test_accuracy"] for r in results]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(1.6 * max(len(labels), 3) + 2, 4))
    ax.bar(x - 0.2, train, width=0.4, label="train")
    ax.bar(x + 0.2, test, width=0.4, label="test")
    for xi, val in zip(x, test):
        ax.text(xi + 0.2, val + 0.5, f"{val:.1f}", ha="center", fontsize=8)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=15, ha="right")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.legend()
    ax.set_title("train vs test accuracy by model")
    return _finish(fig, out_path)


def epoch_curves(history: list[dict], out_path) -> str:
    """Updates per epoch (left axis) and online accuracy (right axis).

    Each history entry needs 'updates' and 'accuracy'.
    """
    epochs = np.arange(1, len(history) + 1)
    updates = [h["updates"] for h in history]
    accuracy = [100.0 * h["accuracy"] for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, updates, marker="o", color="tab:red", label="updates")
    ax.set_xlabel("epoch")
    ax.set_ylabel("weight updates", color="tab:red")
    ax.tick_params(axis="y", labelcolor="tab:red")
    twin = ax.twinx()
    twin.plot(epochs, accuracy, marker="s", color="tab:blue",
              label="online accuracy")
    twin.set_ylabel("online accuracy (%)", color="tab:blue")
    twin.tick_params(axis="y", labelcolor="tab:blue")
    ax.set_title("training progress")
    return _finish(fig, out_path)


def confusion_heatmap(confusion: np.ndarray, out_path) -> str:
    """Row-normalized confusion matrix with counts annotated."""
    confusion = np.asarray(confusion)
    totals = confusion.sum(axis=1, keepdims=True)
    shares = np.divide(confusion, totals, out=np.zeros_like(confusion, float),
                       where=totals > 0)
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(shares, cmap="Blues", vmin=0.0, vmax=1.0)
    fig.colorbar(image, ax=ax, label="share of true class")
    n = confusion.shape[0]
    if n <= 16:
        for i in range(n):
            for j in range(n):
                if confusion[i, j]:
                    ax.text(j, i, str(confusion[i, j]), ha="center",
                            va="center", fontsize=7,
                            color="white" if shares[i, j] > 0.5 else "black")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title("confusion matrix")
    return _finish(fig, out_path)


def cycles_chart(rows: list[dict], out_path) -> str:
    """Formula-derived throughput per operating point, with any quoted
    hardware figures overlaid as markers.

    Each row needs 'm', 'f_max', 'train_fps', 'infer_fps' and optionally
    'reported_train_fps' / 'reported_infer_fps'.
    """
    x = np.arange(len(rows))
    labels = [f"M={r['m']}\n{r['f_max']:g} MHz" for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar(x - 0.2, [r["train_fps"] for r in rows], width=0.4, label="train")
    ax.bar(x + 0.2, [r["infer_fps"] for r in rows], width=0.4, label="infer")
    quoted_labeled = False
    for xi, row in zip(x, rows):
        for offset, key in ((-0.2, "reported_train_fps"),
                            (0.2, "reported_infer_fps")):
            if row.get(key):
                label = None if quoted_labeled else "quoted hardware figure"
                ax.plot(xi + offset, row[key], marker="v", color="black",
                        linestyle="none", label=label)
                quoted_labeled = True
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel("frames per second")
    ax.legend()
    ax.set_title("worst-case formula throughput")
    return _finish(fig, out_path)


def complexity_loglog(rows: list[dict], elm_slope: float, splr_slope: float,
                      out_path) -> str:
    """Measured op counts against hidden size on log-log axes.

    Each row needs 'm', 'elm_solve_ops', 'splr_ops_per_update'.
    """
    m = [r["m"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(m, [r["elm_solve_ops"] for r in rows], marker="o",
              label=f"least-squares solve (slope {elm_slope:.2f})")
    ax.loglog(m, [r["splr_ops_per_update"] for r in rows], marker="s",
              label=f"sparse update per miss (slope {splr_slope:.2f})")
    ax.set_xlabel("hidden nodes M")
    ax.set_ylabel("measured operations")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    ax.set_title("measured training cost growth")
    return _finish(fig, out_path)
