"""Matplotlib figure rendering for the report stage.

Figures are rendered to PNG files alongside the delimited output. Metadata
is scrubbed so reruns produce identical bytes.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .features import FEATURE_NAMES  # noqa: E402
from .ranking import N_ANCHORS  # noqa: E402
from .report import REGIMES  # noqa: E402

_ANCHOR_COLOR = "#2a9d8f"
_OTHER_COLOR = "#b0b0b0"
_NT_COLOR = "#7f7f7f"
_T_COLOR = "#2a6f97"
_DPI = 120


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def render_global_ranking(out_dir, consensus):
    """Horizontal bars of the consensus scores, anchors highlighted."""
    order = np.lexsort((np.arange(len(FEATURE_NAMES)), -consensus.iit_g))
    names = [FEATURE_NAMES[i] for i in order]
    scores = consensus.iit_g[order]
    anchor_set = set(consensus.anchors)
    colors = [_ANCHOR_COLOR if i in anchor_set else _OTHER_COLOR for i in order]
    fig, ax = plt.subplots(figsize=(7, 5))
    y = np.arange(len(names))
    ax.barh(y, scores, color=colors)
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.invert_yaxis()  # best at the top
    ax.axhline(N_ANCHORS - 0.5, color="#c1121f", linestyle="--", linewidth=1.2)
    ax.text(
        0.98,
        (N_ANCHORS - 0.42) / len(names),
        "anchor cutoff",
        color="#c1121f",
        fontsize=8,
        ha="right",
        transform=ax.get_yaxis_transform(),
    )
    ax.set_xlabel("global consensus transfer score")
    ax.set_title("Feature ranking for cross-domain anchors")
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "fig_global_ranking.png"))


def render_regression(out_dir, reg):
    """Scatter of pair score vs mean ROC gain with the fitted line, per regime."""
    fig, axes = plt.subplots(1, len(REGIMES), figsize=(4.2 * len(REGIMES), 3.6), sharey=False)
    if len(REGIMES) == 1:
        axes = [axes]
    for ax, (name, _, _) in zip(axes, REGIMES):
        data = reg[name]
        xs = np.array([p[2] for p in data["points"]], dtype=np.float64)
        ys = np.array([p[3] for p in data["points"]], dtype=np.float64)
        ax.scatter(xs, ys, color=_T_COLOR, s=28, zorder=3)
        s = data["summary"]
        if s is not None and np.isfinite(s.slope) and xs.size:
            grid = np.linspace(xs.min(), xs.max(), 50)
            ax.plot(grid, s.intercept + s.slope * grid, color="#c1121f", linewidth=1.4)
            ax.set_title(f"{name} (r = {s.pearson_r:.3f})", fontsize=10)
        else:
            ax.set_title(name, fontsize=10)
        ax.axhline(0.0, color="#999999", linewidth=0.8, linestyle=":")
        ax.set_xlabel("pair mean anchor score")
    axes[0].set_ylabel("mean TGI (ROC-AUC)")
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "fig_regression.png"))


def render_regime_f1(out_dir, regimes):
    """Grouped bars: NT vs T mean F1 per regime."""
    names = [g["regime"] for g in regimes]
    nt = [g["nt_f1"] for g in regimes]
    t = [g["t_f1"] for g in regimes]
    x = np.arange(len(names))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6, 3.8))
    ax.bar(x - width / 2, nt, width, label="no transfer", color=_NT_COLOR)
    ax.bar(x + width / 2, t, width, label="transfer", color=_T_COLOR)
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylabel("mean F1")
    ax.set_title("Detection F1 by scenario and regime")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "fig_regime_f1.png"))


def render_all(out_dir, consensus, regimes, reg):
    return [
        render_global_ranking(out_dir, consensus),
        render_regression(out_dir, reg),
        render_regime_f1(out_dir, regimes),
    ]
