"""Eigenpair and thermal-ensemble models used by the exact engine."""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..engine.errors import ParameterValidationError
from ..engine.units import INTERNAL_UNITS, REFERENCE_TEMPERATURE_K, UnitSystem


DEFAULT_TRUNCATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EigenSet:
    """Lowest eigenpairs with ascending values and column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 1:
            raise ParameterValidationError("Eigenvalues must be a 1-D array")
        if self.vectors.shape[1] != self.values.shape[0]:
            raise ParameterValidationError(
                f"Got {self.vectors.shape[1]} vectors for {self.values.shape[0]} values")
        if np.any(np.diff(self.values) < 0):
            raise ParameterValidationError("Eigenvalues must be sorted ascending")

    @property
    def count(self) -> int:
        return int(self.values.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def gap(self) -> float:
        return float(self.values[1] - self.values[0]) if self.count > 1 else float("nan")


@dataclass(frozen=True)
class ThermalSpec:
    """Temperature of a thermal ensemble and the eigen-truncation tolerance."""

    temperature: float = REFERENCE_TEMPERATURE_K
    truncation_tolerance: float = DEFAULT_TRUNCATION_TOLERANCE
    units: UnitSystem = INTERNAL_UNITS

    def __post_init__(self):
        if not self.temperature > 0:
            raise ParameterValidationError(
                f"Temperature must be positive, got {self.temperature} K", self.temperature)
        if not 0 < self.truncation_tolerance < 1:
            raise ParameterValidationError(
                f"Truncation tolerance must lie in (0, 1), got {self.truncation_tolerance}",
                self.truncation_tolerance)

    @property
    def beta(self) -> float:
        """Inverse temperature in inverse internal energy units."""
        return self.units.beta(self.temperature)

    @classmethod
    def from_millikelvin(cls, temp_mk: float, **kwargs) -> 'ThermalSpec':
        return cls(temperature=temp_mk * 1e-3, **kwargs)

    def to_dict(self) -> Dict[str, float]:
        return {
            'temperature_K': self.temperature,
            'beta': self.beta,
            'truncation_tolerance': self.truncation_tolerance,
        }


@dataclass(frozen=True)
class ThermalAverage:
    """A truncated thermal average with a rigorous bound on the truncation error."""

    value: float
    bound: float
    levels: int
