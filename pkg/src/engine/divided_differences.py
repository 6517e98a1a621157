"""Divided differences of the exponential ``x -> exp(-beta x)``.

Nodes are shifted by their maximum so the series of the shifted exponential
has only non-negative terms:

    exp(-beta [x_0..x_q]) = (-1)^q exp(-beta c) beta^q sum_m h_m(a) / (m+q)!

with ``a_j = beta (c - x_j) >= 0`` and ``h_m`` the complete homogeneous
symmetric polynomial. The sum is accumulated row by row with a periodic
rescale so that arbitrarily large ``beta * spread`` never overflows; results
come back as a mantissa/exponent pair.
"""

from dataclasses import dataclass
import math
from typing import Sequence, Tuple

import numpy as np
from numba import njit

from .errors import UsageError


RESCALE = 1e250
LOG_RESCALE = math.log(RESCALE)
TAIL_LOG_TOLERANCE = 39.0
LN2 = math.log(2.0)


@dataclass(frozen=True)
class ScaledFloat:
    """A real number ``mantissa * 2**exponent`` with ``1 <= |mantissa| < 2``."""

    mantissa: float
    exponent: int

    @classmethod
    def from_log(cls, sign: int, log_abs: float) -> 'ScaledFloat':
        if sign == 0 or log_abs == -math.inf:
            return cls(0.0, 0)
        exponent = int(math.floor(log_abs / LN2))
        mantissa = math.exp(log_abs - exponent * LN2)
        if mantissa >= 2.0:
            mantissa, exponent = mantissa / 2.0, exponent + 1
        return cls(math.copysign(mantissa, sign), exponent)

    @property
    def sign(self) -> int:
        return 0 if self.mantissa == 0 else (1 if self.mantissa > 0 else -1)

    @property
    def log_abs(self) -> float:
        if self.mantissa == 0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.exponent * LN2

    def to_float(self) -> float:
        """Convert to a float; raises OverflowError instead of returning infinity."""
        return math.ldexp(self.mantissa, self.exponent)

    def __float__(self) -> float:
        return self.to_float()


@njit(cache=True)
def _shifted_series(a):
    """Return (S, log_scale) with ``S * e**log_scale = q! * sum_m h_m(a)/(m+q)!``."""
    q = a.shape[0] - 1
    a_max = 0.0
    for j in range(q + 1):
        if a[j] > a_max:
            a_max = a[j]
    if a_max == 0.0:
        return 1.0, 0.0

    row = np.ones(q + 1)
    total = 1.0
    log_scale = 0.0
    log_a = math.log(a_max)
    m_cap = int(math.ceil(math.e * a_max)) + 60

    m = 0
    while m < m_cap:
        m += 1
        row[0] = a[0] * row[0] / m
        peak = row[0]
        for j in range(1, q + 1):
            row[j] = (j * row[j - 1] + a[j] * row[j]) / (j + m)
            if row[j] > peak:
                peak = row[j]
        total += row[q]

        if peak > RESCALE:
            for j in range(q + 1):
                row[j] /= RESCALE
            total /= RESCALE
            log_scale += LOG_RESCALE

        if m >= 2.0 * a_max:
            # every remaining term is below a_max**m / m!
            log_bound = m * log_a - math.lgamma(m + 1.0)
            if log_bound <= math.log(total) + log_scale - TAIL_LOG_TOLERANCE:
                break
    return total, log_scale


@njit(cache=True)
def divided_diff_log_kernel(x, beta):
    """Compiled core of ``divided_diff_exp_log``; ``x`` must hold at least one node."""
    q = x.shape[0] - 1
    c = x[0]
    for j in range(1, q + 1):
        if x[j] > c:
            c = x[j]
    a = np.empty(q + 1)
    for j in range(q + 1):
        a[j] = beta * (c - x[j])
    total, log_scale = _shifted_series(a)
    log_abs = (-beta * c + q * math.log(beta) - math.lgamma(q + 1.0)
               + math.log(total) + log_scale)
    sign = -1 if q % 2 == 1 else 1
    return sign, log_abs


def divided_diff_exp_log(energies: Sequence[float], beta: float) -> Tuple[int, float]:
    """Sign and log-magnitude of ``exp(-beta [E_0..E_q])``."""
    x = np.ascontiguousarray(energies, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise UsageError("Divided differences need at least one node")
    if not beta > 0:
        raise UsageError(f"beta must be positive, got {beta}")

    sign, log_abs = divided_diff_log_kernel(x, float(beta))
    return int(sign), float(log_abs)


def divided_diff_exp(energies: Sequence[float], beta: float) -> ScaledFloat:
    """Divided difference of ``exp(-beta x)`` over a multiset of nodes.

    Args:
        energies: The q+1 nodes, in any order and with any repetitions
        beta: Positive inverse temperature

    Returns:
        ScaledFloat: The value; its sign is always ``(-1)**q``

    Raises:
        UsageError: If no nodes are given or beta is not positive
    """
    sign, log_abs = divided_diff_exp_log(energies, beta)
    return ScaledFloat.from_log(sign, log_abs)
