"""Chart rendering for evaluation reports.

Uses the Agg backend so rendering works headless, and pins PNG metadata
so the same results render to the same bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ResultMatrix

_PNG_METADATA = {"Software": "skillclf"}
_DPI = 120


def plot_accuracy_by_class(matrix: ResultMatrix, path: str | Path) -> Path:
    """Grouped bar chart of mean accuracy (%) per class, one bar per trial."""
    path = Path(path)
    labels = list(matrix.class_labels)
    trials = list(matrix.trials)
    x = np.arange(len(labels), dtype=np.float64)
    group_width = 0.8
    bar_width = group_width / max(1, len(trials))
    fig, ax = plt.subplots(figsize=(9.0, 4.5))
    for i, trial in enumerate(trials):
        offsets = x - group_width / 2 + (i + 0.5) * bar_width
        heights = []
        positions = []
        for j, label in enumerate(labels):
            cell = matrix.cells.get((trial.trial_id, label))
            if cell is None:
                continue
            positions.append(offsets[j])
            heights.append(100.0 * cell.mean)
        if positions:
            ax.bar(positions, heights, width=bar_width, label=f"trial {trial.trial_id}")
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel("mean accuracy (%)")
    ax.set_ylim(0.0, 100.0)
    ax.set_title(f"Level {matrix.level} accuracy by class")
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_relative_difference(
    class_labels: Sequence[str], values: Sequence[float], path: str | Path
) -> Path:
    """Bar chart of per-class relative differences around a zero line."""
    path = Path(path)
    x = np.arange(len(class_labels), dtype=np.float64)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.bar(x, list(values), width=0.6)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels(list(class_labels))
    ax.set_ylabel("relative difference")
    ax.set_title("Per-class relative difference of best means")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
    return path
