"""Rendering of evaluation tables and report figures.

Figures go to PNG files alongside the delimited outputs; they are a
convenience view, not part of the deterministic contract (reports and
checkpoints are).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .gnn import TrainReport
from .metrics import EvalReport


def format_eval_table(
    reports: Sequence[EvalReport], aggregated: dict[str, tuple[float, float]] | None = None
) -> str:
    """Fixed-format metric table; multi-seed values print as percent +/- std."""
    lines = [f"{'Metric':<10} {'Value (%)':>14}"]
    if aggregated is not None and len(reports) > 1:
        for label, key in (("AUC", "auc"), ("Macro-F1", "macro_f1")):
            mean, std = aggregated[key]
            lines.append(f"{label:<10} {100 * mean:>8.2f}±{100 * std:.2f}")
    else:
        report = reports[0]
        lines.append(f"{'AUC':<10} {100 * report.auc:>14.2f}")
        lines.append(f"{'Macro-F1':<10} {100 * report.macro_f1:>14.2f}")
    lines.append(f"{'n':<10} {reports[0].n:>14d}")
    return "\n".join(lines) + "\n"


def render_loss_curves(reports: Sequence[TrainReport], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for report in reports:
        ax.plot(
            np.arange(1, len(report.epoch_losses) + 1),
            report.epoch_losses,
            label=f"seed {report.seed}",
        )
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.set_title("training loss")
    if reports:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_score_figure(
    scores: Sequence[float], labels: Sequence[int], path: str | Path
) -> None:
    """Score histograms split by true class."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0.0, 1.0, 21)
    ax.hist(scores[labels == 1], bins=bins, alpha=0.6, label="approved")
    ax.hist(scores[labels == 0], bins=bins, alpha=0.6, label="rejected")
    ax.set_xlabel("predicted probability")
    ax.set_ylabel("claims")
    ax.set_title("score distribution by class")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
