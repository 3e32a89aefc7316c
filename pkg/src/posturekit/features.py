"""Fixed 23-dimensional feature vector for one segment of a triaxial series.

The feature order is frozen so persisted models stay portable; see
``FEATURE_NAMES``. Spectral features need at least ``MIN_SEGMENT_SAMPLES``
samples — shorter changepoint fragments are left unlabeled and absorbed at
postprocess time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .core import DataError, Segment, TriaxialSeries, vector_magnitude

log = logging.getLogger(__name__)

FEATURE_NAMES: Tuple[str, ...] = (
    "vm_mean", "vm_sd", "vm_cv", "vm_min", "vm_max",
    "vm_q25", "vm_q50", "vm_q75",
    "vm_acov_argmax_lag",
    "corr_xy", "corr_xz", "corr_yz",
    "roll", "yaw", "pitch",
    "grav_roll", "grav_yaw", "grav_pitch",
    "pgram_peak_freq", "pgram_peak_val",
    "pgram_band_peak_freq", "pgram_band_peak_val",
    "spectral_entropy",
)

N_FEATURES = len(FEATURE_NAMES)

#: Shortest segment with meaningful spectral content (~2 s at 30 Hz).
MIN_SEGMENT_SAMPLES = 64

#: Stepping-cadence band for the constrained periodogram peak, in Hz.
BAND_LO_HZ = 0.3
BAND_HI_HZ = 3.0

GRAVITY_CUTOFF_HZ = 0.5
GRAVITY_FILTER_ORDER = 4


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (N_FEATURES,):
            raise DataError(f"feature vector must have {N_FEATURES} values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in zip(FEATURE_NAMES, self.values)}


def angles(mx: float, my: float, mz: float) -> Tuple[float, float, float]:
    """Roll/yaw/pitch of a mean acceleration direction (two-argument atan)."""
    if mx == 0.0 and my == 0.0 and mz == 0.0:
        raise DataError("undefined orientation")
    return (math.atan2(my, mz), math.atan2(my, mx), math.atan2(mx, mz))


def autocov_argmax(vm, max_lag: int = 25) -> int:
    """Lag in 1..max_lag maximizing |biased autocovariance|; ties take the smaller lag."""
    v = np.asarray(vm, dtype=float)
    n = v.size
    if n <= max_lag:
        raise DataError("too short")
    c = v - v.mean()
    acov = np.array([np.dot(c[:-k], c[k:]) / n for k in range(1, max_lag + 1)])
    return int(np.argmax(np.abs(acov))) + 1


def gravity_lowpass_sos(sample_rate_hz: float):
    return butter(
        GRAVITY_FILTER_ORDER, GRAVITY_CUTOFF_HZ, btype="low",
        fs=sample_rate_hz, output="sos",
    )


def gravity_direction(s: TriaxialSeries, seg: Segment) -> Tuple[float, float, float]:
    """Orientation of the gravity component over a segment.

    Each axis is low-pass filtered at 0.5 Hz (forward-backward, zero phase)
    and the angles are taken from the per-axis means of the filtered slice.
    """
    if seg.n_samples < MIN_SEGMENT_SAMPLES:
        raise DataError("segment too short for spectral features")
    sos = gravity_lowpass_sos(s.sample_rate_hz)
    means = []
    for name in ("x", "y", "z"):
        sl = s.axis(name)[seg.start_idx:seg.end_idx]
        means.append(float(np.mean(sosfiltfilt(sos, sl))))
    return angles(*means)


def periodogram(vm, sample_rate_hz: float) -> Tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram of the mean-subtracted signal.

    Frequencies are k*rate/n for k = 1..floor(n/2); the scaling makes the
    values sum to n * var(vm) exactly (Parseval).
    """
    v = np.asarray(vm, dtype=float)
    n = v.size
    spec = np.abs(np.fft.rfft(v - v.mean())) ** 2 / n
    half = n // 2
    power = 2.0 * spec[1 : half + 1]
    if n % 2 == 0:
        power[-1] = spec[half]  # Nyquist bin appears once in the full spectrum
    freqs = np.arange(1, half + 1) * (sample_rate_hz / n)
    return freqs, power


def periodogram_features(vm, sample_rate_hz: float) -> Tuple[float, float, float, float, float]:
    """(peak_freq, peak_val, band_peak_freq, band_peak_val, entropy).

    The band peak is restricted to the stepping band; when the band holds no
    Fourier frequency it falls back to the global peak (flagged in the logs).
    Entropy is the normalized Shannon entropy of the periodogram, in [0, 1].
    """
    v = np.asarray(vm, dtype=float)
    if v.size < MIN_SEGMENT_SAMPLES:
        raise DataError("segment too short for spectral features")
    freqs, power = periodogram(v, sample_rate_hz)
    k = int(np.argmax(power))
    peak_freq, peak_val = float(freqs[k]), float(power[k])

    in_band = (freqs >= BAND_LO_HZ) & (freqs <= BAND_HI_HZ)
    if np.any(in_band):
        kb = int(np.argmax(np.where(in_band, power, -np.inf)))
        band_freq, band_val = float(freqs[kb]), float(power[kb])
    else:
        log.warning(
            "stepping band [%.1f, %.1f] Hz holds no Fourier frequency for n=%d; "
            "falling back to the global peak", BAND_LO_HZ, BAND_HI_HZ, v.size,
        )
        band_freq, band_val = peak_freq, peak_val

    total = float(power.sum())
    if total <= 0.0:
        entropy = 0.0
    else:
        p = power / total
        nz = p[p > 0]
        entropy = float(-(nz * np.log(nz)).sum() / math.log(len(power)))
    return peak_freq, peak_val, band_freq, band_val, entropy


def extract(s: TriaxialSeries, seg: Segment) -> FeatureVector:
    """Compute the frozen 23-feature vector for one segment."""
    n = seg.n_samples
    if n < MIN_SEGMENT_SAMPLES:
        raise DataError("segment too short for spectral features")
    sl = slice(seg.start_idx, seg.end_idx)
    x, y, z = s.x[sl], s.y[sl], s.z[sl]
    vm = np.sqrt(x * x + y * y + z * z)

    vm_mean = float(vm.mean())
    vm_sd = float(vm.std(ddof=1))
    vm_cv = vm_sd / vm_mean if vm_mean > 0 else 0.0
    q25, q50, q75 = (float(q) for q in np.quantile(vm, [0.25, 0.5, 0.75]))

    roll, yaw, pitch = angles(float(x.mean()), float(y.mean()), float(z.mean()))
    g_roll, g_yaw, g_pitch = gravity_direction(s, seg)
    pk_f, pk_v, band_f, band_v, entropy = periodogram_features(vm, s.sample_rate_hz)

    return FeatureVector(np.array([
        vm_mean, vm_sd, vm_cv, float(vm.min()), float(vm.max()),
        q25, q50, q75,
        float(autocov_argmax(vm)),
        _corr(x, y), _corr(x, z), _corr(y, z),
        roll, yaw, pitch,
        g_roll, g_yaw, g_pitch,
        pk_f, pk_v, band_f, band_v, entropy,
    ]))


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    # Constant axes happen on at-rest bouts; define their correlation as 0
    # rather than letting NaN poison the feature vector.
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    c = float(np.corrcoef(a, b)[0, 1])
    return min(1.0, max(-1.0, c))
