"""Read/write the accelerometer and event CSV formats, align by POSIX time,
split recordings into daily files, and extract labeled bout tuples.

Accel CSV: header ``timestamp,x,y,z`` (POSIX seconds, g-units).
Event CSV: header ``start_time,duration_s,label`` with label in {0,1,2}.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .core import (
    DailyFile,
    DataError,
    Event,
    EventLog,
    PostureLabel,
    Segment,
    TriaxialSeries,
    grid_to_runs,
    labels_to_grid,
)

ACCEL_COLUMNS = ("timestamp", "x", "y", "z")
EVENT_COLUMNS = ("start_time", "duration_s", "label")

# Allowed deviation of an inter-sample gap from the modal gap: 1 ppm relative,
# plus an absolute term covering float64 POSIX quantization (~2.4e-7 s at 2009+
# epochs) and the 1e-7 s precision of written timestamps.
_GAP_RTOL = 1e-6
_GAP_ATOL = 5e-6


def read_accel_csv(path) -> TriaxialSeries:
    """Parse an accelerometer CSV into a TriaxialSeries.

    The sample rate is inferred from the timestamps (mode of inter-sample
    gaps, refined by the total span); sampling must be uniform to within the
    tolerance above or the file is rejected as irregular.
    """
    df = pd.read_csv(path)
    if tuple(df.columns) != ACCEL_COLUMNS:
        raise DataError(f"accel CSV must have columns {','.join(ACCEL_COLUMNS)}")
    if len(df) < 2:
        raise DataError("accel CSV needs at least two rows")
    vals = df[["x", "y", "z"]].to_numpy(dtype=np.float64)
    bad = ~np.all(np.isfinite(vals), axis=1)
    ts = df["timestamp"].to_numpy(dtype=np.float64)
    bad |= ~np.isfinite(ts)
    if bad.any():
        raise DataError(f"corrupt sample at row {int(np.argmax(bad)) + 1}")

    gaps = np.diff(ts)
    if np.any(gaps <= 0):
        raise DataError("irregular sampling: timestamps not strictly increasing")
    # Mode of gaps (at 1 us resolution) is the reference for the regularity
    # check; the rate itself is the modal gap refined over the full span,
    # which cancels per-timestamp quantization noise.
    quantized = np.round(gaps, 6)
    uniq, counts = np.unique(quantized, return_counts=True)
    modal_gap = float(uniq[np.argmax(counts)])
    if np.any(np.abs(gaps - modal_gap) > _GAP_RTOL * modal_gap + _GAP_ATOL):
        raise DataError("irregular sampling")
    rate = round((len(ts) - 1) / (ts[-1] - ts[0]), 6)
    return TriaxialSeries(
        vals[:, 0], vals[:, 1], vals[:, 2],
        sample_rate_hz=rate, start_time=float(ts[0]),
    )


def _fmt_timestamp(t: float) -> str:
    # Shortest lossless float repr, padded to the promised >= 4 decimals.
    s = repr(float(t))
    if "e" in s or "E" in s:
        return f"{t:.7f}"
    head, _, frac = s.partition(".")
    return f"{head}.{(frac or '0').ljust(4, '0')}"


def write_accel_csv(path, s: TriaxialSeries) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(ACCEL_COLUMNS) + "\n")
        ts = s.start_time + np.arange(s.n_samples) / s.sample_rate_hz
        for t, x, y, z in zip(ts, s.x, s.y, s.z):
            fh.write(f"{_fmt_timestamp(t)},{x:.8g},{y:.8g},{z:.8g}\n")


def read_event_csv(path) -> EventLog:
    df = pd.read_csv(path)
    if tuple(df.columns) != EVENT_COLUMNS:
        raise DataError(f"event CSV must have columns {','.join(EVENT_COLUMNS)}")
    labels = []
    for raw in df["label"]:
        try:
            labels.append(PostureLabel(int(raw)))
        except (ValueError, TypeError):
            raise DataError(f"invalid label {raw!r}") from None
    starts = df["start_time"].to_numpy(dtype=np.float64)
    durs = df["duration_s"].to_numpy(dtype=np.float64)
    if np.any(np.diff(starts) <= 0):
        raise DataError("events not ordered by start_time")
    # Validate contiguity at file precision, then rebuild starts as an exact
    # running sum so the in-memory log abuts to machine precision.
    t = float(starts[0])
    events = []
    for i, (s0, d, lab) in enumerate(zip(starts, durs, labels)):
        if abs(s0 - t) > 1e-3:
            raise DataError("non-contiguous events")
        d = round(d / 0.1) * 0.1
        events.append(Event(t, d, lab))
        t += d
    return EventLog(tuple(events))


def write_event_csv(path, log: EventLog) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(EVENT_COLUMNS) + "\n")
        for ev in log.events:
            fh.write(f"{ev.start_time:.4f},{ev.duration_s:.4f},{int(ev.label)}\n")


def _bridge(chunks: List[TriaxialSeries], max_gap_s: float) -> List[TriaxialSeries]:
    """Concatenate consecutive chunks whose gap is at most max_gap_s.

    Gaps must land on the sample grid of the leading chunk; missing samples
    are filled by linear interpolation between the flanking samples (short
    dropouts only — anything longer than max_gap_s starts a new epoch).
    """
    merged: List[TriaxialSeries] = []
    for chunk in chunks:
        if not merged:
            merged.append(chunk)
            continue
        prev = merged[-1]
        rate = prev.sample_rate_hz
        if abs(chunk.sample_rate_hz - rate) > 1e-6 * rate:
            raise DataError("mismatched sample rates between chunks")
        gap_s = chunk.start_time - prev.end_time
        if gap_s < -0.5 / rate:
            raise DataError("overlapping series chunks")
        gap_n = gap_s * rate
        aligned = abs(gap_n - round(gap_n)) < 0.01
        if gap_s <= max_gap_s and aligned:
            fill = int(round(gap_n))
            axes = []
            for name in ("x", "y", "z"):
                a, b = prev.axis(name), chunk.axis(name)
                if fill > 0:
                    ramp = np.linspace(a[-1], b[0], fill + 2)[1:-1]
                    axes.append(np.concatenate([a, ramp, b]))
                else:
                    axes.append(np.concatenate([a, b]))
            merged[-1] = TriaxialSeries(
                axes[0], axes[1], axes[2],
                sample_rate_hz=rate, start_time=prev.start_time,
            )
        else:
            merged.append(chunk)
    return merged


def align_and_split(
    series: Union[TriaxialSeries, Sequence[TriaxialSeries]],
    log: EventLog,
    max_gap_s: float = 3600.0,
    participant_id: str = "unknown",
) -> List[DailyFile]:
    """Align series chunk(s) with a truth log and split into daily files.

    Each maximal contiguous stretch of samples becomes one wear epoch; gaps
    longer than ``max_gap_s`` separate epochs, shorter on-grid gaps are
    bridged. Every epoch is cropped to its overlap with the log (cut points
    snapped to the log's 0.1 s grid) and gets the cropped truth attached.
    """
    chunks = [series] if isinstance(series, TriaxialSeries) else sorted(
        series, key=lambda s: s.start_time
    )
    if not chunks:
        raise DataError("no series provided")
    epochs = _bridge(list(chunks), max_gap_s)

    out: List[DailyFile] = []
    for s in epochs:
        t0 = max(s.start_time, log.start_time)
        t1 = min(s.end_time, log.end_time)
        if t1 - t0 <= 1.0 / s.sample_rate_hz:
            continue
        # Snap the crop window to the truth grid, then map to sample indices.
        t0s, t1s = log._snap(t0), log._snap(t1)
        t0s, t1s = max(t0s, log.start_time), min(t1s, log.end_time)
        i0 = max(0, s.index_at(t0s))
        i1 = min(s.n_samples, s.index_at(t1s))
        if i1 - i0 < 1:
            continue
        cropped = s.slice(i0, i1)
        truth = log.crop(cropped.start_time, cropped.end_time)
        out.append(
            DailyFile(participant_id, len(out) + 1, cropped, truth)
        )
    if not out:
        raise DataError("no temporal overlap")
    return out


def extract_bout_tuples(d: DailyFile) -> List[Tuple[Segment, PostureLabel]]:
    """Ground-truth bouts of a daily file as (Segment, label) tuples.

    Segments are the maximal constant-label runs of the truth rasterized at
    the sample resolution, so they tile ``[0, T)`` exactly and adjacent
    segments carry distinct labels.
    """
    if d.truth is None or len(d.truth) == 0:
        raise DataError("no ground truth")
    grid = labels_to_grid(d.truth, 1.0 / d.series.sample_rate_hz)
    # Rasterization length can differ from T by one cell at the edges; clamp.
    t_n = d.series.n_samples
    if len(grid) > t_n:
        grid = grid[:t_n]
    elif len(grid) < t_n:
        grid = np.concatenate([grid, np.repeat(grid[-1], t_n - len(grid))])
    return [
        (Segment(a, b), PostureLabel(v)) for a, b, v in grid_to_runs(grid)
    ]
