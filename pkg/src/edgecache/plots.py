"""Figure rendering for reports: every chart goes straight to a file.

Uses the Agg backend so runs never need a display. Figures are a
convenience view of the CSV/JSON output, not part of the deterministic
report contract.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_hit_ratio_figure(slots: Sequence[Mapping], path, *, title: str = "Instantaneous hit ratio") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    xs = [row["slot"] for row in slots]
    ys = [row["hit_ratio"] for row in slots]
    ax.plot(xs, ys, marker="o", markersize=2.5, linewidth=1.0)
    ax.set_xlabel("slot")
    ax.set_ylabel("hit ratio")
    ax.set_ylim(bottom=0.0)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_selection_figure(rates: Mapping[str, float], path, *, title: str = "Policy selection rates") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    labels = list(rates)
    values = [rates[k] for k in labels]
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("fraction of decisions")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_figure(log_rows, path, *, title: str = "Selector training") -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    xs = [row.decision_idx for row in log_rows]
    ax1.plot(xs, [row.reward for row in log_rows], linewidth=0.8)
    ax1.set_ylabel("reward per decision")
    ax1.grid(alpha=0.3)
    ax1.set_title(title)
    trained = [(row.decision_idx, row.loss) for row in log_rows if row.loss is not None]
    if trained:
        ax2.plot([t[0] for t in trained], [t[1] for t in trained], linewidth=0.8, color="tab:orange")
    ax2.set_ylabel("training loss")
    ax2.set_xlabel("decision")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_comparison_figure(rows: Sequence[Mapping], path, *, title: str = "Cumulative hit ratio") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    labels = [r["controller"] for r in rows]
    values = [r["hit_ratio"] for r in rows]
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("hit ratio")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
