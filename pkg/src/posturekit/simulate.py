"""Ground-truthed synthetic daily files from the three-regime switching model.

The hidden posture path is a semi-Markov chain: a state, a log-normal dwell
time (rounded to the 0.1 s truth grid), then a transition drawn from a
row-stochastic matrix with zero diagonal. Emissions follow the regime model:

    sit    mu0 + noise(sigma0)
    stand  mu1 + noise(sigma1)
    step   mu1 + step_amp * sin(2*pi*f*t) * mix + noise(sigma2)

Sitting and standing directions are unit vectors; stepping shares the
standing trend. Cohort generation re-draws the device orientation per wearing
epoch (one random rotation applied to both directions), which is exactly the
locality that defeats global mean features.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

import numpy as np

from .core import (
    DailyFile,
    DataError,
    Event,
    EventLog,
    PostureLabel,
    TriaxialSeries,
    labels_to_grid,
)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise DataError("zero direction vector")
    return v / n


@dataclass(frozen=True)
class DwellParams:
    median_s: float
    sigma: float

    def __post_init__(self):
        if self.median_s <= 0 or self.sigma < 0:
            raise DataError("dwell parameters must be positive")


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    duration_s: float = 14400.0
    sample_rate_hz: float = 30.0
    start_time: float = 1_600_000_000.0
    transition_matrix: np.ndarray = field(
        default_factory=lambda: np.array([
            [0.0, 0.8, 0.2],
            [0.5, 0.0, 0.5],
            [0.2, 0.8, 0.0],
        ])
    )
    dwell: Tuple[DwellParams, DwellParams, DwellParams] = (
        DwellParams(600.0, 0.8),   # sit
        DwellParams(90.0, 0.6),    # stand
        DwellParams(60.0, 0.6),    # step
    )
    mu0: np.ndarray = field(default_factory=lambda: np.array([0.74, 0.20, 0.64]))
    mu1: np.ndarray = field(default_factory=lambda: np.array([0.96, 0.20, 0.20]))
    sigma0: float = 0.01
    sigma1: float = 0.02
    sigma2: float = 0.15
    step_freq_hz: float = 1.8
    step_amp_g: float = 0.3
    step_axis_mix: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.25, 0.25]))

    def __post_init__(self):
        tm = np.asarray(self.transition_matrix, dtype=float)
        if tm.shape != (3, 3) or np.any(tm < 0):
            raise DataError("transition matrix must be 3x3 non-negative")
        if np.any(np.abs(tm.sum(axis=1) - 1.0) > 1e-9):
            raise DataError("transition matrix rows must sum to 1")
        if np.any(np.diag(tm) != 0.0):
            raise DataError("transition matrix diagonal must be zero")
        object.__setattr__(self, "transition_matrix", tm)
        object.__setattr__(self, "mu0", _unit(self.mu0))
        object.__setattr__(self, "mu1", _unit(self.mu1))
        object.__setattr__(self, "step_axis_mix", _unit(self.step_axis_mix))
        if not (self.sigma0 <= self.sigma1 < self.sigma2):
            raise DataError("noise SDs must satisfy sigma0 <= sigma1 < sigma2")
        if self.duration_s < 1.0 or self.sample_rate_hz <= 0:
            raise DataError("invalid duration or sample rate")


def _sample_label_path(cfg: SimConfig, rng) -> EventLog:
    total = round(cfg.duration_s / 0.1) * 0.1
    # Start-state distribution proportional to expected dwell (time-weighted).
    mean_dwell = np.array([d.median_s * np.exp(d.sigma**2 / 2.0) for d in cfg.dwell])
    probs = mean_dwell / mean_dwell.sum()
    state = int(rng.choice(3, p=probs))
    t = 0.0
    events: List[Event] = []
    while t < total - 1e-9:
        dw = cfg.dwell[state]
        dur = dw.median_s * float(np.exp(dw.sigma * rng.standard_normal()))
        dur = max(0.1, round(dur / 0.1) * 0.1)
        dur = min(dur, round((total - t) / 0.1) * 0.1)
        events.append(Event(cfg.start_time + t, dur, PostureLabel(state)))
        t = round(t + dur, 6)
        state = int(rng.choice(3, p=cfg.transition_matrix[state]))
    return EventLog(tuple(events))


def simulate_daily(
    cfg: SimConfig, participant_id: str = "sim", epoch_index: int = 1
) -> DailyFile:
    """One ground-truthed daily file; deterministic given cfg.seed.

    The emitted per-sample labels are the truth log rasterized at the sample
    period, so rasterizing the truth back always reproduces the hidden path.
    """
    rng = np.random.default_rng(cfg.seed)
    truth = _sample_label_path(cfg, rng)
    path = labels_to_grid(truth, 1.0 / cfg.sample_rate_hz)
    n = len(path)

    t_rel = np.arange(n) / cfg.sample_rate_hz
    data = np.empty((n, 3))
    mus = np.vstack([cfg.mu0, cfg.mu1, cfg.mu1])
    sigmas = np.array([cfg.sigma0, cfg.sigma1, cfg.sigma2])
    data[:] = mus[path]
    step_mask = path == int(PostureLabel.STEP)
    if step_mask.any():
        tone = cfg.step_amp_g * np.sin(2.0 * np.pi * cfg.step_freq_hz * t_rel[step_mask])
        data[step_mask] += tone[:, None] * cfg.step_axis_mix[None, :]
    data += rng.standard_normal((n, 3)) * sigmas[path, None]

    series = TriaxialSeries(
        data[:, 0], data[:, 1], data[:, 2],
        sample_rate_hz=cfg.sample_rate_hz, start_time=cfg.start_time,
    )
    return DailyFile(participant_id, epoch_index, series, truth)


def _random_rotation(rng) -> np.ndarray:
    """Uniform random rotation matrix (normalized quaternion)."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def simulate_cohort(
    cfg: SimConfig,
    n_participants: int,
    epochs_per_participant: int,
    day_gap_s: float = 86400.0,
) -> Tuple[List[DailyFile], List[Dict]]:
    """Ground-truthed corpus with per-epoch device orientation.

    Every epoch derives its own seed and rotates the template directions by a
    fresh random rotation (the same rotation for mu0, mu1, and the step mix,
    so class geometry is preserved while global mean features are not).
    Returns the daily files plus one parameter record per epoch.
    """
    if n_participants < 1 or epochs_per_participant < 1:
        raise DataError("need at least one participant and epoch")
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_participants * epochs_per_participant)
    files: List[DailyFile] = []
    params: List[Dict] = []
    k = 0
    for p in range(1, n_participants + 1):
        pid = f"p{p:02d}"
        for j in range(1, epochs_per_participant + 1):
            ss = seeds[k]
            k += 1
            rot_rng = np.random.default_rng(ss)
            rot = _random_rotation(rot_rng)
            epoch_seed = int(rot_rng.integers(0, 2**31 - 1))
            epoch_cfg = replace(
                cfg,
                seed=epoch_seed,
                mu0=rot @ cfg.mu0,
                mu1=rot @ cfg.mu1,
                step_axis_mix=rot @ cfg.step_axis_mix,
                start_time=cfg.start_time + k * day_gap_s,
            )
            files.append(simulate_daily(epoch_cfg, pid, j))
            params.append({
                "participant_id": pid,
                "epoch_index": j,
                "seed": epoch_seed,
                "mu0": epoch_cfg.mu0.tolist(),
                "mu1": epoch_cfg.mu1.tolist(),
                "step_axis_mix": epoch_cfg.step_axis_mix.tolist(),
                "start_time": epoch_cfg.start_time,
                "duration_s": cfg.duration_s,
                "sample_rate_hz": cfg.sample_rate_hz,
            })
    return files, params
