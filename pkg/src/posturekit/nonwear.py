"""Non-wear detection on minute-level activity counts (Choi-style rule).

The device at rest still reads 1 g of gravity, so the activity proxy is the
per-minute sum of absolute deviations of the vector magnitude from its minute
mean — zero for an unworn, motionless device regardless of orientation.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .core import DailyFile, DataError, TriaxialSeries, vector_magnitude

#: Counts below this (in g·samples) are treated as zero activity.
ZERO_EPSILON = 1e-3


def minute_counts(s: TriaxialSeries) -> np.ndarray:
    """Activity proxy per whole minute; the trailing partial minute is dropped."""
    per_min = int(round(s.sample_rate_hz * 60))
    n_min = s.n_samples // per_min
    if n_min < 1:
        raise DataError("series too short")
    vm = vector_magnitude(s)[: n_min * per_min].reshape(n_min, per_min)
    return np.abs(vm - vm.mean(axis=1, keepdims=True)).sum(axis=1)


def detect_nonwear(
    counts,
    window_min: int = 90,
    tolerance_min: int = 2,
    guard_min: int = 30,
    epsilon: float = ZERO_EPSILON,
) -> List[Tuple[int, int]]:
    """Non-wear intervals as half-open minute ranges.

    A minute is zero if its count is below ``epsilon``. Nonzero runs no longer
    than ``tolerance_min`` are absorbed when flanked by at least ``guard_min``
    zero minutes on both sides; maximal zero runs of at least ``window_min``
    minutes are reported.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0:
        raise DataError("empty counts")
    zero = counts < epsilon

    # Absorb tolerated spikes (single pass over the original mask).
    absorbed = zero.copy()
    i = 0
    n = len(zero)
    while i < n:
        if zero[i]:
            i += 1
            continue
        j = i
        while j < n and not zero[j]:
            j += 1
        run = j - i
        left = _zeros_before(zero, i)
        right = _zeros_after(zero, j)
        if run <= tolerance_min and left >= guard_min and right >= guard_min:
            absorbed[i:j] = True
        i = j

    intervals = []
    i = 0
    while i < n:
        if not absorbed[i]:
            i += 1
            continue
        j = i
        while j < n and absorbed[j]:
            j += 1
        if j - i >= window_min:
            intervals.append((i, j))
        i = j
    return intervals


def _zeros_before(zero: np.ndarray, i: int) -> int:
    j = i
    while j > 0 and zero[j - 1]:
        j -= 1
    return i - j


def _zeros_after(zero: np.ndarray, j: int) -> int:
    k = j
    while k < len(zero) and zero[k]:
        k += 1
    return k - j


def remove_nonwear(d: DailyFile, intervals) -> List[DailyFile]:
    """Split a daily file at non-wear minute intervals into wear epochs.

    Epochs are renumbered 1..K in time order; truth (when present) is cropped
    to each epoch. An interval reaching the last counted minute extends
    through the trailing partial minute.
    """
    s = d.series
    per_min = int(round(s.sample_rate_hz * 60))
    n_min = s.n_samples // per_min
    t_n = s.n_samples

    removed = []
    for m0, m1 in sorted(intervals):
        a = m0 * per_min
        b = t_n if m1 >= n_min else m1 * per_min
        removed.append((a, b))

    keep = []
    cursor = 0
    for a, b in removed:
        if a > cursor:
            keep.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < t_n:
        keep.append((cursor, t_n))

    out = []
    for i0, i1 in keep:
        sub = s.slice(i0, i1)
        truth = d.truth.crop(sub.start_time, sub.end_time) if d.truth else None
        if truth is not None and len(truth) == 0:
            truth = None
        out.append(DailyFile(d.participant_id, len(out) + 1, sub, truth))
    return out
