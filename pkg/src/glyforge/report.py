"""Figures written next to the JSON-lines outputs."""
from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def plot_pretrain_curves(curves: Sequence[dict], path) -> None:
    """Recovery accuracy and perplexity per epoch, atoms and residues."""
    epochs = [r["epoch"] for r in curves]
    fig, (ax_acc, ax_ppl) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_acc.plot(epochs, [r["atom_acc"] for r in curves], label="atom")
    ax_acc.plot(epochs, [r["mono_acc"] for r in curves], label="monosaccharide")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("recovery accuracy")
    ax_acc.legend(frameon=False)
    ax_ppl.plot(epochs, [r["atom_ppl"] for r in curves], label="atom")
    ax_ppl.plot(epochs, [r["mono_ppl"] for r in curves], label="monosaccharide")
    ax_ppl.set_xlabel("epoch")
    ax_ppl.set_ylabel("perplexity")
    ax_ppl.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_finetune_curves(history: Sequence[dict], path, metric_name: str = "metric") -> None:
    epochs = [r["epoch"] for r in history]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(epochs, [r["loss"] for r in history], color="tab:gray", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    if any("valid_metric" in r for r in history):
        twin = ax.twinx()
        twin.plot(epochs, [r.get("valid_metric", float("nan")) for r in history],
                  color="tab:blue", label=f"valid {metric_name}")
        twin.set_ylabel(metric_name)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_bench(reports, path) -> None:
    names = [r.variant for r in reports]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    width = 0.38
    ax.bar([i - width / 2 for i in x], [r.training_throughput for r in reports], width, label="training")
    ax.bar([i + width / 2 for i in x], [r.inference_throughput for r in reports], width, label="inference")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names)
    ax.set_ylabel("samples / s")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
