"""Figure rendering for the evaluate report path.

Renders the two summary figures alongside the delimited output: predicted vs
true sitting-bout-length ECDFs, and per-participant total sitting time. The
metrics module stays numbers-only; everything here is presentation.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import Ecdf


def save_ecdf_figure(
    pred: Ecdf,
    truth: Ecdf,
    path,
    ks: Optional[Tuple[float, float]] = None,
    min_len_s: float = 180.0,
) -> None:
    """Step plot of both sitting-bout-length ECDFs (durations in minutes)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for ecdf, label, style in ((truth, "truth", "-"), (pred, "predicted", "--")):
        xs = np.concatenate([[min_len_s], ecdf.points])
        ys = np.concatenate([[0.0], ecdf(ecdf.points)])
        ax.step(xs / 60.0, ys, where="post", linestyle=style, label=label)
    ax.set_xlabel("sitting bout length (min)")
    ax.set_ylabel("cumulative fraction")
    title = "Sitting bout length ECDF"
    if ks is not None:
        title += f"  (KS D={ks[0]:.3f}, p={ks[1]:.3f})"
    ax.set_title(title)
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_totals_figure(rows: Sequence[dict], path) -> None:
    """Predicted vs true total sitting minutes, one point per participant."""
    fig, ax = plt.subplots(figsize=(5, 5))
    true_min = np.array([r["true_sit_s"] for r in rows]) / 60.0
    pred_min = np.array([r["pred_sit_s"] for r in rows]) / 60.0
    lim = max(1.0, float(max(true_min.max(), pred_min.max())) * 1.05)
    ax.plot([0, lim], [0, lim], color="gray", lw=1, label="y = x")
    ax.scatter(true_min, pred_min, s=28, zorder=3)
    for r, tx, ty in zip(rows, true_min, pred_min):
        ax.annotate(r["participant"], (tx, ty), fontsize=7,
                    xytext=(3, 3), textcoords="offset points")
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    ax.set_xlabel("true sitting time (min)")
    ax.set_ylabel("predicted sitting time (min)")
    ax.set_title("Total sitting time per participant")
    ax.legend(loc="upper left")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
