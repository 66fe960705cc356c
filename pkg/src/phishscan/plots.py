"""Figure rendering for evaluation reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import SCORE_BINS, ScoreHistogram  # noqa: E402

_CLASS_STYLE = (
    ("tp", "#d62728"),
    ("fn", "#ff9896"),
    ("tn", "#1f77b4"),
    ("fp", "#aec7e8"),
)


def render_score_histogram(hist: ScoreHistogram, path: Path | str,
                           title: str = "Phishing score distribution") -> None:
    """Stacked bar chart of score counts per outcome class, written to file."""
    scores = list(range(SCORE_BINS))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    bottoms = [0] * SCORE_BINS
    for outcome, color in _CLASS_STYLE:
        values = hist.counts[outcome]
        ax.bar(scores, values, bottom=bottoms, color=color,
               label=outcome.upper(), edgecolor="white", linewidth=0.5)
        bottoms = [b + v for b, v in zip(bottoms, values)]
    ax.set_xlabel("phishing_score")
    ax.set_ylabel("number of emails")
    ax.set_title(title)
    ax.set_xticks(scores)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
