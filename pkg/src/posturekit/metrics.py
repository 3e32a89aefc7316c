"""Evaluation quantities: sit/non-sit confusion at grid resolution, derived
rates, sit-to-step error, sitting-bout-length ECDFs, the two-sample
Kolmogorov-Smirnov test, and per-participant sitting totals.

Everything here emits numbers (CSV/JSON-ready); figure rendering lives in
``report``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .core import DataError, EventLog, PostureLabel, Segment

#: Evaluation grid resolution matching the ground-truth granularity.
DEFAULT_RESOLUTION_S = 0.1


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts over {Sit, NonSit} grid cells; rows are prediction, columns truth."""

    tp: int  # predicted Sit, truth Sit
    fp: int  # predicted Sit, truth NonSit
    fn: int  # predicted NonSit, truth Sit
    tn: int  # predicted NonSit, truth NonSit

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.fp + other.fp,
            self.fn + other.fn, self.tn + other.tn,
        )


def confusion(pred_grid, truth_grid) -> ConfusionMatrix:
    """Cell counts with Sit as the positive class; Stand and Step map to NonSit."""
    pred = np.asarray(pred_grid)
    truth = np.asarray(truth_grid)
    if pred.shape != truth.shape:
        raise DataError("length mismatch between prediction and truth grids")
    p_sit = pred == int(PostureLabel.SIT)
    t_sit = truth == int(PostureLabel.SIT)
    return ConfusionMatrix(
        tp=int(np.sum(p_sit & t_sit)),
        fp=int(np.sum(p_sit & ~t_sit)),
        fn=int(np.sum(~p_sit & t_sit)),
        tn=int(np.sum(~p_sit & ~t_sit)),
    )


def rates(cm: ConfusionMatrix) -> Dict[str, Optional[float]]:
    """Sensitivity/specificity/balanced accuracy/precision/F1.

    A rate whose denominator is zero is reported as None (absent), never 0.
    """
    def ratio(num, den):
        return num / den if den > 0 else None

    sens = ratio(cm.tp, cm.tp + cm.fn)
    spec = ratio(cm.tn, cm.tn + cm.fp)
    prec = ratio(cm.tp, cm.tp + cm.fp)
    balanced = (sens + spec) / 2.0 if sens is not None and spec is not None else None
    f1 = None
    if prec is not None and sens is not None and prec + sens > 0:
        f1 = 2.0 * prec * sens / (prec + sens)
    return {
        "sensitivity": sens,
        "specificity": spec,
        "balanced_accuracy": balanced,
        "precision": prec,
        "f1": f1,
    }


def sit_to_step_error(
    pred_segments: Sequence[Segment], truth_grid
) -> Optional[float]:
    """Fraction of predicted stepping bouts whose majority true label is sitting.

    ``truth_grid`` holds one true label per sample, aligned with the segment
    index space. Returns None when no stepping bout was predicted.
    """
    truth = np.asarray(truth_grid)
    steps = [s for s in pred_segments if s.label == PostureLabel.STEP]
    if not steps:
        return None
    bad = 0
    for seg in steps:
        cells = truth[seg.start_idx:seg.end_idx]
        if cells.size == 0:
            continue
        counts = np.bincount(cells, minlength=3)
        if int(np.argmax(counts)) == int(PostureLabel.SIT):
            bad += 1
    return bad / len(steps)


@dataclass(frozen=True)
class Ecdf:
    """Empirical CDF of a sample; right-continuous step function."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.points, dtype=float))
        if arr.size == 0:
            raise DataError("no qualifying bouts")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def n(self) -> int:
        return len(self.points)

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.points, np.asarray(x, dtype=float), side="right") / self.n


def bout_length_ecdf(
    log: EventLog,
    label: PostureLabel = PostureLabel.SIT,
    min_len_s: float = 180.0,
) -> Ecdf:
    """ECDF of the durations of ``label`` bouts strictly longer than ``min_len_s``."""
    durations = [
        ev.duration_s for ev in log.events
        if ev.label == label and ev.duration_s > min_len_s
    ]
    return Ecdf(np.array(durations))


def _kolmogorov_sf(lam: float) -> float:
    """Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < 1e-12:
            break
    return min(1.0, max(0.0, total))


def ks_two_sample(a: Ecdf, b: Ecdf) -> Tuple[float, float]:
    """Exact sup-distance over pooled jump points plus an asymptotic p-value."""
    pooled = np.union1d(a.points, b.points)
    d = float(np.max(np.abs(a(pooled) - b(pooled))))
    n_eff = a.n * b.n / (a.n + b.n)
    p = _kolmogorov_sf(math.sqrt(n_eff) * d)
    return d, p


def total_sitting_time(log: EventLog) -> float:
    """Total sitting seconds in one event log."""
    return sum(ev.duration_s for ev in log.events if ev.label == PostureLabel.SIT)
