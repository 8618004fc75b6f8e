"""File-rendered figures accompanying the delimited reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE = dict(dpi=110, metadata={"Software": "hanzi-attr"})


def save_ablation_figure(report, path) -> None:
    """Horizontal bars: character accuracy per attribute subset."""
    names = [f"{name} ({dims}d)" for name, dims, _ in report.char_acc]
    accs = [acc for _, _, acc in report.char_acc]
    fig, ax = plt.subplots(figsize=(7, 0.45 * len(names) + 1.2))
    ax.barh(np.arange(len(names)), accs, color="#4878a8")
    ax.set_yticks(np.arange(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_xlabel("character accuracy")
    ax.set_title("accuracy by attribute subset")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_attribute_figure(report, path) -> None:
    """Per-set attribute accuracy bars."""
    names = list(report.attr_acc)
    accs = [report.attr_acc[n] for n in names]
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(names)), 3.4))
    ax.bar(np.arange(len(names)), accs, color="#6a9a58")
    ax.set_xticks(np.arange(len(names)))
    ax.set_xticklabels(names, rotation=75, fontsize=7)
    ax.set_ylim(0, 1)
    ax.set_ylabel("accuracy")
    ax.set_title("per-set attribute accuracy")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_loss_figure(trace, path) -> None:
    """Training loss per iteration."""
    trace = np.asarray(trace)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(np.arange(trace.size), trace, lw=0.8, color="#a85448")
    ax.set_xlabel("iteration")
    ax.set_ylabel("batch loss")
    ax.set_title("training loss")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_ap_histogram(per_query, path) -> None:
    """Distribution of per-query average precision."""
    values = np.asarray(sorted(per_query.values()), dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.hist(values, bins=20, range=(0, 1), color="#8a6aa0")
    ax.set_xlabel("average precision")
    ax.set_ylabel("queries")
    ax.set_title(f"per-query AP (mAP={values.mean():.3f})")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
