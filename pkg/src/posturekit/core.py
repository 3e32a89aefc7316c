"""Shared domain types, the posture label vocabulary, and time/index arithmetic.

All types are immutable after construction (arrays are made read-only), so
instances can be shared freely across worker processes. Wall-clock time only
appears at the ingest/export boundary; everything downstream works in sample
indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional, Sequence, Tuple

import numpy as np

#: Granularity of ground-truth event logs, in seconds.
EVENT_GRANULARITY_S = 0.1


class DataError(ValueError):
    """Input data violates a documented contract (bad file, bad shape, bad value)."""


class PostureLabel(IntEnum):
    SIT = 0
    STAND = 1
    STEP = 2


def _as_readonly_f64(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TriaxialSeries:
    """Uniformly sampled 3-axis acceleration record in g-units.

    ``start_time`` is the POSIX time of sample 0; sample ``i`` sits at
    ``start_time + i / sample_rate_hz``.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    sample_rate_hz: float = 30.0
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", _as_readonly_f64(self.x, "x"))
        object.__setattr__(self, "y", _as_readonly_f64(self.y, "y"))
        object.__setattr__(self, "z", _as_readonly_f64(self.z, "z"))
        n = len(self.x)
        if len(self.y) != n or len(self.z) != n:
            raise DataError("axis arrays must have equal length")
        if n < 1:
            raise DataError("series must contain at least one sample")
        if not (self.sample_rate_hz > 0):
            raise DataError("sample_rate_hz must be positive")
        for name, arr in (("x", self.x), ("y", self.y), ("z", self.z)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite sample in axis {name}")

    @property
    def n_samples(self) -> int:
        return len(self.x)

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def end_time(self) -> float:
        """POSIX time just past the last sample."""
        return self.start_time + self.duration_s

    def axis(self, name: str) -> np.ndarray:
        try:
            return {"x": self.x, "y": self.y, "z": self.z}[name]
        except KeyError:
            raise DataError(f"unknown axis {name!r}") from None

    def time_at(self, idx: int) -> float:
        return self.start_time + idx / self.sample_rate_hz

    def index_at(self, t: float) -> int:
        # Round-half-up so boundaries map the same way as grid midpoints.
        return int(math.floor((t - self.start_time) * self.sample_rate_hz + 0.5))

    def slice(self, start_idx: int, end_idx: int) -> "TriaxialSeries":
        if not (0 <= start_idx < end_idx <= self.n_samples):
            raise DataError("slice out of range")
        return TriaxialSeries(
            self.x[start_idx:end_idx],
            self.y[start_idx:end_idx],
            self.z[start_idx:end_idx],
            sample_rate_hz=self.sample_rate_hz,
            start_time=self.time_at(start_idx),
        )


@dataclass(frozen=True)
class Segment:
    """Half-open sample interval ``[start_idx, end_idx)`` with an optional label."""

    start_idx: int
    end_idx: int
    label: Optional[PostureLabel] = None

    def __post_init__(self):
        if not (0 <= self.start_idx < self.end_idx):
            raise DataError("segment requires 0 <= start_idx < end_idx")

    @property
    def n_samples(self) -> int:
        return self.end_idx - self.start_idx

    def with_label(self, label: Optional[PostureLabel]) -> "Segment":
        return replace(self, label=label)


@dataclass(frozen=True)
class Event:
    start_time: float
    duration_s: float
    label: PostureLabel

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration_s


@dataclass(frozen=True)
class EventLog:
    """activPAL-style posture log: ordered, abutting events on a 0.1 s grid."""

    events: Tuple[Event, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        prev_end = None
        for ev in self.events:
            if ev.duration_s < EVENT_GRANULARITY_S - 1e-9:
                raise DataError("event duration below 0.1 s granularity")
            ratio = ev.duration_s / EVENT_GRANULARITY_S
            if abs(ratio - round(ratio)) > 1e-5:
                raise DataError("event duration is not a multiple of 0.1 s")
            if prev_end is not None and abs(ev.start_time - prev_end) > 1e-6:
                raise DataError("events must abut in time order")
            prev_end = ev.end_time

    def __len__(self) -> int:
        return len(self.events)

    @property
    def start_time(self) -> float:
        return self.events[0].start_time

    @property
    def end_time(self) -> float:
        return self.events[-1].end_time

    @property
    def total_duration_s(self) -> float:
        return sum(ev.duration_s for ev in self.events)

    def _snap(self, t: float) -> float:
        """Nearest point of this log's 0.1 s grid."""
        k = round((t - self.start_time) / EVENT_GRANULARITY_S)
        return self.start_time + k * EVENT_GRANULARITY_S

    def crop(self, t0: float, t1: float) -> "EventLog":
        """Restrict to ``[t0, t1)`` with the cut points snapped to the 0.1 s grid."""
        lo, hi = self._snap(t0), self._snap(t1)
        out = []
        for ev in self.events:
            s = max(ev.start_time, lo)
            e = min(ev.end_time, hi)
            if e - s > 1e-9:
                out.append(Event(s, e - s, ev.label))
        return EventLog(tuple(out))


@dataclass(frozen=True)
class DailyFile:
    """One contiguous wear epoch of one participant, with optional ground truth."""

    participant_id: str
    epoch_index: int
    series: TriaxialSeries
    truth: Optional[EventLog] = None

    def __post_init__(self):
        if self.epoch_index < 1:
            raise DataError("epoch_index must be >= 1")
        if self.truth is not None and len(self.truth) > 0:
            period = 1.0 / self.series.sample_rate_hz
            if (
                abs(self.truth.start_time - self.series.start_time) > period
                or abs(self.truth.end_time - self.series.end_time) > period
            ):
                raise DataError("truth does not cover the series span")


def vector_magnitude(s: TriaxialSeries) -> np.ndarray:
    """Per-sample Euclidean norm of the three axes."""
    return np.sqrt(s.x * s.x + s.y * s.y + s.z * s.z)


def labels_to_grid(log: EventLog, resolution_s: float) -> np.ndarray:
    """Rasterize an event log onto a uniform grid of ``resolution_s`` cells.

    Each cell takes the label of the event covering its midpoint; midpoints
    break boundary ties deterministically. ``resolution_s`` must divide the
    0.1 s event granularity evenly or be a multiple of it. Returns an int8
    array of posture codes, one per cell.
    """
    if len(log) == 0:
        raise DataError("empty event log")
    for ratio in (EVENT_GRANULARITY_S / resolution_s, resolution_s / EVENT_GRANULARITY_S):
        if abs(ratio - round(ratio)) < 1e-6 and round(ratio) >= 1:
            break
    else:
        raise DataError("resolution must divide 0.1 s or be a multiple of it")

    total = log.end_time - log.start_time
    n_cells = int(round(total / resolution_s))
    mids = log.start_time + (np.arange(n_cells) + 0.5) * resolution_s
    starts = np.array([ev.start_time for ev in log.events])
    idx = np.searchsorted(starts, mids, side="right") - 1
    idx = np.clip(idx, 0, len(log) - 1)
    codes = np.array([int(ev.label) for ev in log.events], dtype=np.int8)
    return codes[idx]


def grid_to_runs(grid: np.ndarray) -> list[tuple[int, int, int]]:
    """Maximal constant-value runs of a label grid as (start, end, value) triples."""
    grid = np.asarray(grid)
    if grid.size == 0:
        return []
    change = np.flatnonzero(np.diff(grid)) + 1
    bounds = np.concatenate(([0], change, [grid.size]))
    return [
        (int(bounds[i]), int(bounds[i + 1]), int(grid[bounds[i]]))
        for i in range(len(bounds) - 1)
    ]
