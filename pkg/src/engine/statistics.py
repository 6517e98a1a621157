"""Binning analysis of Monte Carlo time series."""

import logging
import math
from typing import Tuple

import numpy as np

from ..models.qmc import ObservableEstimate
from .errors import UsageError


logger = logging.getLogger(__name__)

MIN_BINS = 16
DEFAULT_BINS = 32
MIN_LEVEL_BINS = 8
TAU_BINS = 64
EQUILIBRATION_SIGMAS = 3.0


def binning_levels(series: np.ndarray) -> np.ndarray:
    """Standard error of the mean at successive pairwise binning levels.

    Level 0 is the naive error of the raw series; binning stops once fewer
    than eight bins would remain.
    """
    b = np.asarray(series, dtype=float)
    if b.shape[0] < 2:
        return np.zeros(1)

    n_levels = max(1, int(math.floor(math.log2(b.shape[0] / MIN_LEVEL_BINS))) + 1)
    errors = np.zeros(n_levels)
    errors[0] = np.std(b) / math.sqrt(b.shape[0] - 1)
    for level in range(1, n_levels):
        if b.shape[0] % 2 == 0:
            b = 0.5 * (b[::2] + b[1::2])
        else:
            b = 0.5 * (b[1::2] + b[2::2])
        errors[level] = np.std(b) / math.sqrt(b.shape[0] - 1)
    return errors


def autocorrelation_time(series: np.ndarray) -> float:
    """Integrated autocorrelation time from the binning error growth.

    Reads the deepest level that still holds 64 bins.
    """
    errors = binning_levels(series)
    if errors[0] == 0.0:
        return 0.0
    n = np.asarray(series).shape[0]
    level = min(len(errors) - 1, max(0, int(math.floor(math.log2(max(n, 1) / TAU_BINS)))))
    return 0.5 * ((errors[level] / errors[0]) ** 2 - 1.0)


def binned_mean(series: np.ndarray, n_bins: int = DEFAULT_BINS) -> Tuple[float, float]:
    """Mean and standard error from ``n_bins`` equal consecutive bins.

    Leading samples that do not fill a whole bin are dropped.
    """
    series = np.asarray(series, dtype=float)
    if n_bins < MIN_BINS:
        raise UsageError(f"Need at least {MIN_BINS} bins, got {n_bins}")
    if series.shape[0] < n_bins:
        raise UsageError(f"{series.shape[0]} samples cannot fill {n_bins} bins")

    per_bin = series.shape[0] // n_bins
    usable = series[series.shape[0] - per_bin * n_bins:]
    bins = usable.reshape(n_bins, per_bin).mean(axis=1)
    return float(bins.mean()), float(bins.std(ddof=1) / math.sqrt(n_bins))


def estimate(series: np.ndarray, n_bins: int = DEFAULT_BINS, name: str = "") -> ObservableEstimate:
    """Binned estimate with autocorrelation time and an equilibration check.

    The check compares the means of the two halves of the series; they must
    agree within three combined standard errors.
    """
    series = np.asarray(series, dtype=float)
    mean, error = binned_mean(series, n_bins)

    half = series.shape[0] // 2
    half_bins = max(MIN_BINS // 2, n_bins // 2)
    equilibrated = True
    if half >= half_bins:
        first = series[:half]
        second = series[half:]
        m1, m2 = first.mean(), second.mean()
        e1 = _half_error(first, half_bins)
        e2 = _half_error(second, half_bins)
        combined = math.hypot(e1, e2)
        equilibrated = bool(abs(m1 - m2) <= EQUILIBRATION_SIGMAS * combined or m1 == m2)
        if not equilibrated:
            logger.warning(f"Equilibration check failed for '{name}': "
                           f"first half {m1:.6g}, second half {m2:.6g} (+-{combined:.3g})")

    return ObservableEstimate(mean=mean, error=error, tau=autocorrelation_time(series),
                              n_bins=n_bins, equilibrated=equilibrated)


def _half_error(series: np.ndarray, n_bins: int) -> float:
    per_bin = series.shape[0] // n_bins
    usable = series[series.shape[0] - per_bin * n_bins:]
    bins = usable.reshape(n_bins, per_bin).mean(axis=1)
    return float(bins.std(ddof=1) / math.sqrt(n_bins))
