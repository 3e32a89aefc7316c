"""Second-stage sitting/standing separation among non-stepping segments.

Standing and stepping share the same trend component, so each daily file's
predicted stepping bouts provide an empirical reference distribution for the
standing mean on the chosen axis. A non-stepping segment whose mean falls
outside the central (1 - alpha) interval of that distribution is rejected to
sitting. The test is local: nothing crosses daily-file boundaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .core import DataError, PostureLabel, Segment, TriaxialSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage2Config:
    alpha: float = 0.05
    slack: float = 0.0
    fallback: str = "sit"  # label for non-step segments when no steps exist

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DataError("alpha must be in (0, 1)")
        if self.slack < 0.0:
            raise DataError("slack must be non-negative")
        if self.fallback not in ("sit", "stand"):
            raise DataError("fallback must be 'sit' or 'stand'")


def segment_axis_mean(s: TriaxialSeries, seg: Segment, axis: str) -> float:
    return float(s.axis(axis)[seg.start_idx:seg.end_idx].mean())


def reference_interval(
    step_segments: Sequence[Segment],
    s: TriaxialSeries,
    axis: str,
    alpha: float = 0.05,
) -> Tuple[float, float]:
    """Central (1 - alpha) interval of per-segment means from stepping bouts.

    Means are unweighted; quantiles interpolate linearly, so a single stepping
    bout degenerates to a zero-width interval at its mean.
    """
    if len(step_segments) == 0:
        raise DataError("no reference distribution")
    means = np.array([segment_axis_mean(s, seg, axis) for seg in step_segments])
    lo, hi = np.quantile(means, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(lo), float(hi)


def classify_nonstep(
    seg_mean: float, interval: Tuple[float, float], slack: float = 0.0
) -> PostureLabel:
    """Stand when the mean sits inside the (closed, slack-widened) interval, else Sit."""
    lo, hi = interval
    if lo - slack <= seg_mean <= hi + slack:
        return PostureLabel.STAND
    return PostureLabel.SIT


def classify_daily(
    segments: Sequence[Segment],
    step_mask: Sequence[bool],
    s: TriaxialSeries,
    axis: str,
    cfg: Stage2Config = Stage2Config(),
) -> List[Segment]:
    """Label every segment: Step where masked, Sit/Stand elsewhere via the test.

    With zero predicted stepping bouts there is no reference distribution and
    every non-step segment gets the configured fallback label.
    """
    if len(segments) != len(step_mask):
        raise DataError("segments and step_mask must align")
    step_segments = [seg for seg, m in zip(segments, step_mask) if m]
    interval = None
    if step_segments:
        interval = reference_interval(step_segments, s, axis, cfg.alpha)
    else:
        log.warning(
            "no stepping bouts predicted; labeling all non-step segments as %s",
            cfg.fallback,
        )
        fallback = PostureLabel.SIT if cfg.fallback == "sit" else PostureLabel.STAND

    out = []
    for seg, is_step in zip(segments, step_mask):
        if is_step:
            out.append(seg.with_label(PostureLabel.STEP))
        elif interval is not None:
            mean = segment_axis_mean(s, seg, axis)
            out.append(seg.with_label(classify_nonstep(mean, interval, cfg.slack)))
        else:
            out.append(seg.with_label(fallback))
    return out
