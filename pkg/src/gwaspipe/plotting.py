"""Static report figures (ROC curves, feature-score profiles).

Figures go to PNG files next to the CSV reports. The Agg backend and
stripped PNG metadata keep the output byte-stable for a fixed seed.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "figure.dpi": 100,
    "savefig.dpi": 100,
}


def figsize(width=4.5, ratio=None):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    return (width, width * (golden if ratio is None else ratio))


def _save(fig, path):
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_roc(curves, path, title=None):
    """Plot ``{label: RocCurve}`` on one set of axes with the chance diagonal."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(4.0, 1.0))
        ax.plot([0, 1], [0, 1], color="0.6", linestyle="--", linewidth=0.8)
        for label, c in curves.items():
            ax.plot(c.fpr, c.tpr, marker=".", markersize=2, label=label)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        if title:
            ax.set_title(title)
        if len(curves) > 1:
            ax.legend(loc="lower right", frameon=False, ncol=2 if len(curves) > 6 else 1)
        fig.tight_layout()
        _save(fig, path)


def plot_scores(scores, path, alphas=(), highlight=(), title=None):
    """Stem plot of feature scores by index, with threshold lines."""
    s = np.asarray(scores.scores if hasattr(scores, "scores") else scores)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(6.0))
        x = np.arange(s.size)
        ax.vlines(x, 0, s, color="0.45", linewidth=0.6)
        hl = np.asarray(sorted(highlight), dtype=int)
        if hl.size:
            ax.scatter(hl, s[hl], s=10, color="C3", zorder=3, label="planted")
            ax.legend(frameon=False, loc="upper right")
        for a in alphas:
            ax.axhline(a, color="C0", linestyle=":", linewidth=0.8)
            ax.annotate(f"alpha={a:g}", (s.size - 1, a), fontsize=6, ha="right", va="bottom")
        ax.set_xlabel("feature index")
        ax.set_ylabel("MTD score")
        ax.set_xlim(-0.5, max(s.size - 0.5, 0.5))
        ax.set_ylim(0, max(2.0 if s.size == 0 else float(s.max()) * 1.1, 1e-3))
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_fold_scores(values, path, label="accuracy", title=None):
    v = np.asarray(values, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(4.0))
        ax.bar(np.arange(1, v.size + 1), v, color="0.6")
        if v.size:
            ax.axhline(float(np.mean(v)), color="C3", linestyle="--", linewidth=0.8, label="mean")
            ax.legend(frameon=False)
        ax.set_xlabel("fold")
        ax.set_ylabel(label)
        ax.set_ylim(0, 1)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
