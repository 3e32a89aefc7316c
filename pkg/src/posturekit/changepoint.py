"""Penalized changepoint detection on one accelerometer axis.

Each daily file is cut into fixed-width windows and an exact pruned dynamic
program (PELT-style optimal partitioning) finds mean/variance changes inside
each window; window boundaries themselves become changepoints and the results
are concatenated. The per-segment cost is twice the negative maximized
Gaussian log-likelihood with segment-specific mean and variance.

Penalty per changepoint, for a window of n samples and the 2-parameter
(mean, variance) Gaussian segment model:

    BIC     3*ln(n)
    MBIC    4*ln(n), plus ln(len) added to each segment cost
    Manual  user-supplied positive constant

The MBIC per-segment term makes the cost slightly super-additive, so pruning
uses the conservative constant -ln(n/4) in that mode to stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from .core import DailyFile, DataError, Segment, TriaxialSeries

#: Variance floor preventing -inf cost on constant slices.
VAR_FLOOR = 1e-12

_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class CpdConfig:
    window_width: int = 1800
    min_seg_len: int = 450
    penalty: Union[str, float] = "MBIC"
    axis: str = "auto"
    decimate: int = 1

    def __post_init__(self):
        if self.min_seg_len < 2:
            raise DataError("min_seg_len must be >= 2")
        if self.window_width < 2 * self.min_seg_len:
            raise DataError("window_width must be >= 2 * min_seg_len")
        if isinstance(self.penalty, str):
            if self.penalty.upper() not in ("BIC", "MBIC"):
                raise DataError("penalty must be BIC, MBIC, or a positive number")
            object.__setattr__(self, "penalty", self.penalty.upper())
        elif not self.penalty > 0:
            raise DataError("manual penalty must be positive")
        if self.axis.lower() not in ("auto",) + _AXES:
            raise DataError("axis must be one of x, y, z, auto")
        object.__setattr__(self, "axis", self.axis.lower())
        if self.decimate < 1:
            raise DataError("decimate must be >= 1")

    @property
    def mbic(self) -> bool:
        return self.penalty == "MBIC"

    def penalty_value(self, n: int) -> float:
        if self.penalty == "BIC":
            return 3.0 * math.log(n)
        if self.penalty == "MBIC":
            return 4.0 * math.log(n)
        return float(self.penalty)


def choose_axis(s: TriaxialSeries, cfg: CpdConfig) -> str:
    """Axis with the most substantial behavior change.

    With ``axis='auto'`` this is the axis maximizing the variance of block
    means over non-overlapping blocks of ``min_seg_len`` samples (ties break
    lexicographically, so x wins on constant input); otherwise the configured
    axis is returned.
    """
    if cfg.axis != "auto":
        return cfg.axis
    block = cfg.min_seg_len
    n_blocks = max(1, s.n_samples // block)
    best, best_var = "x", -1.0
    for name in _AXES:
        v = s.axis(name)[: n_blocks * block]
        means = v.reshape(n_blocks, block).mean(axis=1)
        var = float(np.var(means))
        if var > best_var + 1e-18:
            best, best_var = name, var
    return best


def segment_cost(values) -> float:
    """Twice the negative maximized Gaussian log-likelihood of one slice."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2:
        raise DataError("segment too short")
    var = max(float(np.var(v)), VAR_FLOOR)
    return n * (math.log(2.0 * math.pi * var) + 1.0)


def detect_window(values, cfg: CpdConfig) -> List[int]:
    """Exact minimizer of total segment cost + penalty * (#changepoints).

    Every segment must span at least ``min_seg_len`` samples. Returns the
    sorted interior changepoint indices (a changepoint at ``k`` means segments
    ``[.., k)`` and ``[k, ..)``).
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    length = cfg.min_seg_len
    if n < 2 * length:
        return []
    beta = cfg.penalty_value(n)
    mbic = cfg.mbic
    s1 = np.concatenate([[0.0], np.cumsum(v)])
    s2 = np.concatenate([[0.0], np.cumsum(v * v)])
    log2pi = math.log(2.0 * math.pi)
    # Pruning constant: 0 is valid for the plain Gaussian cost; the MBIC
    # log-length term needs the conservative -ln(n/4) (see module docstring).
    k_prune = -math.log(n / 4.0) if mbic else 0.0

    f = np.full(n + 1, np.inf)
    f[0] = -beta
    last = np.zeros(n + 1, dtype=np.int64)
    cands = np.empty(n + 1, dtype=np.int64)
    cands[0] = 0
    n_c = 1
    for t in range(length, n + 1):
        tau_new = t - length
        if tau_new >= length:
            cands[n_c] = tau_new
            n_c += 1
        taus = cands[:n_c]
        nseg = t - taus
        mean = (s1[t] - s1[taus]) / nseg
        var = (s2[t] - s2[taus]) / nseg - mean * mean
        np.maximum(var, VAR_FLOOR, out=var)
        total = f[taus] + nseg * (np.log(var) + log2pi + 1.0) + beta
        if mbic:
            total += np.log(nseg)
        best = int(np.argmin(total))
        f[t] = total[best]
        last[t] = taus[best]
        keep = total + (k_prune - beta) <= f[t]
        kept = taus[keep]  # boolean indexing copies, safe to write back
        n_c = len(kept)
        cands[:n_c] = kept

    cps = []
    t = n
    while t > 0:
        tau = int(last[t])
        if tau > 0:
            cps.append(tau)
        t = tau
    return sorted(cps)


def partition_objective(values, changepoints: Sequence[int], cfg: CpdConfig) -> float:
    """Objective value of a given changepoint set (for cross-checking searches)."""
    v = np.asarray(values, dtype=float)
    bounds = [0] + sorted(int(c) for c in changepoints) + [v.size]
    total = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        total += segment_cost(v[a:b])
        if cfg.mbic:
            total += math.log(b - a)
    return total + cfg.penalty_value(v.size) * len(changepoints)


def _decimate(v: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return v
    n = v.size // factor
    return v[: n * factor].reshape(n, factor).mean(axis=1)


def detect_daily(d: DailyFile, cfg: CpdConfig) -> List[Segment]:
    """Partition a daily file into contiguous candidate segments.

    The working signal is the chosen axis, optionally mean-decimated. Windows
    of ``window_width`` working samples are searched independently (the final
    remainder window is merged into its predecessor when shorter than
    ``min_seg_len``); window boundaries are kept as changepoints.
    """
    axis = choose_axis(d.series, cfg)
    v = _decimate(d.series.axis(axis), cfg.decimate)
    n = v.size
    t_n = d.series.n_samples
    if n < 2 * cfg.min_seg_len:
        return [Segment(0, t_n)]

    starts = list(range(0, n, cfg.window_width))
    ends = [min(s0 + cfg.window_width, n) for s0 in starts]
    if len(starts) > 1 and ends[-1] - starts[-1] < cfg.min_seg_len:
        starts.pop()
        ends.pop(-2)

    cuts = {0, n}
    for s0, e0 in zip(starts, ends):
        cuts.add(e0)
        for cp in detect_window(v[s0:e0], cfg):
            cuts.add(s0 + cp)

    bounds = sorted(cuts)
    # Map working-sample cuts back to original indices; the tail lost to
    # decimation joins the final segment.
    idx = [min(b * cfg.decimate, t_n) for b in bounds]
    idx[-1] = t_n
    return [Segment(a, b) for a, b in zip(idx[:-1], idx[1:]) if b > a]
