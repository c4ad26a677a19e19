"""Statistical estimators over simulated trajectories.

Error bars on moments use batch means, so serial correlation of the
photon-number samples is accounted for. Spectra come from segment-averaged
periodograms of binned detection counts, normalized to the shot-noise level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .noise import relaxation_rates
from .sim import Trajectory
from .steady import LaserParams, steady_state

__all__ = [
    "EstimateError",
    "EstimateWithError",
    "PsdEstimate",
    "correlation_time",
    "default_batches",
    "default_bin_width",
    "batch_means",
    "estimate_mean_photon",
    "estimate_fano",
    "estimate_psd",
]

MIN_SAMPLES = 100
MIN_BATCHES = 20
MIN_SEGMENT_BINS = 64


class EstimateError(ValueError):
    pass


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    std_error: float
    n_effective: float

    def z_score(self, reference: float) -> float:
        diff = self.value - reference
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_effective": self.n_effective}


@dataclass(frozen=True)
class PsdEstimate:
    omega: np.ndarray
    value: np.ndarray
    std_error: np.ndarray
    bin_width: float
    n_segments: int

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.omega.tolist(), self.value.tolist(), self.std_error.tolist()))

    def __len__(self) -> int:
        return len(self.omega)


def correlation_time(params: LaserParams) -> float:
    """Decay time of the slowest relaxation mode of the linearized dynamics."""
    if params.J <= 0:
        return 1.0 / params.alpha
    p, q = relaxation_rates(params)
    return 1.0 / min(p.real, q.real)


def default_batches(params: LaserParams, window: float) -> int:
    return max(MIN_BATCHES, int(window // (50.0 * correlation_time(params))))


def default_bin_width(params: LaserParams) -> float:
    return min(0.1 / params.alpha, 0.1 / steady_state(params).m_hat)


def batch_means(x: np.ndarray, n_batches: int) -> np.ndarray:
    """Means of ``n_batches`` equal contiguous blocks; a ragged tail is dropped."""
    size = x.shape[0] // n_batches
    if size < 1:
        raise EstimateError(f"cannot form {n_batches} batches from {x.shape[0]} samples")
    return x[: size * n_batches].reshape(n_batches, size, *x.shape[1:]).mean(axis=1)


def _batches_for(traj: Trajectory, n_batches: int | None) -> int:
    n = traj.m.size
    if n < MIN_SAMPLES:
        raise EstimateError(f"need ≥ {MIN_SAMPLES} samples past burn-in, got {n}")
    if n_batches is None:
        n_batches = default_batches(traj.params, traj.window)
    return int(min(max(n_batches, MIN_BATCHES), n // 5))


def estimate_mean_photon(traj: Trajectory, n_batches: int | None = None) -> EstimateWithError:
    """Batch-means estimate of the mean intracavity photon number."""
    nb = _batches_for(traj, n_batches)
    m = traj.m.astype(float)
    m = m[: (m.size // nb) * nb]
    means = batch_means(m, nb)
    value = float(m.mean())
    se = float(means.std(ddof=1) / math.sqrt(nb))
    var = float(m.var())
    n_eff = max(1.0, var / se**2) if se > 0 else float(m.size)
    return EstimateWithError(value, se, min(n_eff, float(m.size)))


def estimate_fano(traj: Trajectory, n_batches: int | None = None) -> EstimateWithError:
    """``var(m) / mean(m)`` with a batch-means, delta-method standard error."""
    nb = _batches_for(traj, n_batches)
    m = traj.m.astype(float)
    m = m[: (m.size // nb) * nb]
    mu1 = m.mean()
    if mu1 == 0:
        raise EstimateError("Fano undefined for dark trajectory")
    mu2 = (m * m).mean()
    var = m.var(ddof=1)
    value = float(var / mu1)

    b = batch_means(np.column_stack([m, m * m]), nb)
    cov = np.cov(b, rowvar=False, ddof=1) / nb
    grad = np.array([-mu2 / mu1**2 - 1.0, 1.0 / mu1])
    se2 = float(grad @ cov @ grad)
    se = math.sqrt(se2) if se2 > 0 and var > 0 else 0.0
    # effective count from the variance of a sample variance under independence
    n_eff = float(m.size) if se == 0 else max(1.0, 2.0 * value**2 / se**2)
    return EstimateWithError(value, se, min(n_eff, float(m.size)))


def estimate_psd(
    detections,
    duration: float,
    bin_width: float,
    n_segments: int,
    start: float = 0.0,
) -> PsdEstimate:
    """Shot-noise-normalized photocurrent spectrum of a detection record.

    Counts in bins of `bin_width` over ``[start, duration)`` are split into
    `n_segments` equal segments. Each mean-subtracted segment gives a
    rectangular-window periodogram; their average divided by the mean count
    per bin is 1 for a Poisson stream. Binning is a boxcar filter acting on
    the excess over shot noise only, so that excess is divided by
    ``sinc^2(omega bin_width / 2)``. Frequencies up to ``pi / (2 bin_width)``
    are reported, the DC bin excluded.
    """
    t = np.asarray(detections, dtype=float)
    if t.size == 0:
        raise EstimateError("empty detection stream")
    if not bin_width > 0 or n_segments < 1:
        raise EstimateError("bin_width must be positive and n_segments ≥ 1")
    window = duration - start
    n_bins = int(math.floor(window / bin_width + 1e-9))
    seg = n_bins // n_segments
    if seg < MIN_SEGMENT_BINS:
        raise EstimateError(
            f"bin_width {bin_width:g} incompatible with duration: {n_bins} bins give "
            f"{seg} per segment, need ≥ {MIN_SEGMENT_BINS}"
        )
    used = seg * n_segments
    idx = np.floor((t - start) / bin_width).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < used)]
    counts = np.bincount(idx, minlength=used).astype(float).reshape(n_segments, seg)
    mu = counts.mean()
    if mu <= 0:
        raise EstimateError("no detections inside the analysis window")

    x = counts - counts.mean(axis=1, keepdims=True)
    k_max = seg // 4
    power = np.abs(np.fft.rfft(x, axis=1)[:, 1 : k_max + 1]) ** 2 / seg
    raw = power.mean(axis=0) / mu
    se = (power.std(axis=0, ddof=1) / math.sqrt(n_segments) / mu) if n_segments > 1 else np.full(k_max, np.nan)

    k = np.arange(1, k_max + 1)
    omega = 2.0 * math.pi * k / (seg * bin_width)
    g = np.sinc(omega * bin_width / (2.0 * math.pi)) ** 2  # numpy sinc is sin(pi x)/(pi x)
    return PsdEstimate(
        omega=omega,
        value=1.0 + (raw - 1.0) / g,
        std_error=se / g,
        bin_width=float(bin_width),
        n_segments=int(n_segments),
    )
