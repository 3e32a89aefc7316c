"""Bout assembly and spurious-label correction.

Adjacent same-label segments merge into bouts; implausibly long standing
bouts are corrected to sitting (standing rarely lasts 10 minutes in free
living); fragments too short for feature extraction inherit the label of the
longer neighbor.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

from .core import (
    EVENT_GRANULARITY_S,
    DataError,
    Event,
    EventLog,
    PostureLabel,
    Segment,
    TriaxialSeries,
)
from .features import MIN_SEGMENT_SAMPLES

DEFAULT_STAND_THRESHOLD_S = 600.0


def _check_contiguous(segments: Sequence[Segment]) -> None:
    for prev, cur in zip(segments, segments[1:]):
        if prev.end_idx != cur.start_idx:
            raise DataError("segments must form a contiguous partition")


def merge_adjacent(segments: Sequence[Segment]) -> List[Segment]:
    """Merge maximal runs of equal labels; adjacent output labels are distinct."""
    _check_contiguous(segments)
    out: List[Segment] = []
    for seg in segments:
        if out and out[-1].label == seg.label:
            out[-1] = Segment(out[-1].start_idx, seg.end_idx, seg.label)
        else:
            out.append(seg)
    return out


def absorb_short_fragments(
    bouts: Sequence[Segment], min_len_samples: int = MIN_SEGMENT_SAMPLES
) -> List[Segment]:
    """Fold bouts shorter than ``min_len_samples`` (or unlabeled ones) into the
    longer neighbor, ties going to the earlier neighbor; runs to fixpoint."""
    out = list(bouts)
    _check_contiguous(out)

    def needs_absorb(i: int) -> bool:
        return (out[i].label is None or out[i].n_samples < min_len_samples) and len(out) > 1

    changed = True
    while changed:
        changed = False
        for i in range(len(out)):
            if not needs_absorb(i):
                continue
            if i == 0:
                donor = 1
            elif i == len(out) - 1:
                donor = i - 1
            else:
                left_n = out[i - 1].n_samples
                right_n = out[i + 1].n_samples
                donor = i - 1 if left_n >= right_n else i + 1
            if out[donor].label is None and out[i].label is not None:
                # Never absorb a labeled bout into an unlabeled one.
                donor = i + 1 if donor == i - 1 and i + 1 < len(out) else donor
            out[i] = out[i].with_label(out[donor].label)
            out = merge_adjacent(out)
            changed = True
            break
    if len(out) == 1 and out[0].label is None:
        raise DataError("cannot absorb fragments: no labeled bout present")
    return out


def correct_long_stands(
    bouts: Sequence[Segment],
    sample_rate_hz: float,
    threshold_s: float = DEFAULT_STAND_THRESHOLD_S,
) -> List[Segment]:
    """Relabel Stand bouts longer than ``threshold_s`` to Sit, re-merging to
    fixpoint (two passes suffice: relabeling only creates Sit-Sit adjacency)."""
    out = merge_adjacent(bouts)
    while True:
        relabeled = [
            seg.with_label(PostureLabel.SIT)
            if seg.label == PostureLabel.STAND
            and seg.n_samples / sample_rate_hz > threshold_s
            else seg
            for seg in out
        ]
        relabeled = merge_adjacent(relabeled)
        if relabeled == out:
            return relabeled
        out = relabeled


def finalize_bouts(
    segments: Sequence[Segment],
    sample_rate_hz: float,
    stand_threshold_s: float = DEFAULT_STAND_THRESHOLD_S,
    min_len_samples: int = MIN_SEGMENT_SAMPLES,
) -> List[Segment]:
    """Full postprocess pass: absorb fragments, merge, correct long stands."""
    bouts = absorb_short_fragments(merge_adjacent(segments), min_len_samples)
    return correct_long_stands(bouts, sample_rate_hz, stand_threshold_s)


def bouts_to_events(bouts: Sequence[Segment], series: TriaxialSeries) -> EventLog:
    """Export labeled bouts as an event log on the 0.1 s truth grid.

    Bout boundaries are snapped to the nearest 0.1 s relative to the series
    start; bouts are far longer than the grid step, so snapping never
    collapses an event.
    """
    _check_contiguous(bouts)
    if any(b.label is None for b in bouts):
        raise DataError("all bouts must be labeled before export")

    def snap(idx: int) -> float:
        rel = idx / series.sample_rate_hz
        return round(rel / EVENT_GRANULARITY_S) * EVENT_GRANULARITY_S

    events = []
    for b in bouts:
        t0, t1 = snap(b.start_idx), snap(b.end_idx)
        if t1 - t0 < EVENT_GRANULARITY_S - 1e-9:
            raise DataError("bout too short to export at 0.1 s granularity")
        events.append(Event(series.start_time + t0, round(t1 - t0, 6), b.label))
    return EventLog(tuple(events))


def long_stand_fraction(log: EventLog, threshold_s: float = 180.0) -> Optional[float]:
    """Fraction of Stand bouts longer than ``threshold_s`` (None without stands).

    Reported on training truth so the stand-correction threshold can be
    re-derived on new corpora.
    """
    stands = [ev.duration_s for ev in log.events if ev.label == PostureLabel.STAND]
    if not stands:
        return None
    return sum(1 for d in stands if d > threshold_s) / len(stands)
