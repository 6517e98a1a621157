"""Circuit parameter and anneal point models with validation."""

from dataclasses import dataclass, asdict
import math
from typing import Any, Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np

from ..engine.errors import ParameterValidationError
from ..engine.params_validator import CircuitValidator
from ..engine.units import INTERNAL_UNITS, UnitSystem


class InternalCircuit(NamedTuple):
    """Circuit values expressed in the internal unit system."""

    l1: float
    l2: float
    c1: float
    c2: float
    i1: float
    i2: float
    c12: float
    m12: float


@dataclass(frozen=True)
class CircuitParams:
    """Two coupled rf-SQUIDs described in laboratory units.

    Inductances are in picohenry, capacitances in femtofarad and critical
    currents in microampere.
    """

    L1: float
    L2: float
    C1: float
    C2: float
    I1: float
    I2: float
    C12: float
    M12: float

    def __post_init__(self):
        """Validate circuit values after initialization."""
        errors = CircuitValidator.validate_params(self.to_dict())
        if errors:
            raise ParameterValidationError("; ".join(errors), errors)

    def to_internal(self, units: UnitSystem = INTERNAL_UNITS) -> InternalCircuit:
        """Convert every value to internal units."""
        return InternalCircuit(
            l1=units.inductance(self.L1 * 1e-12),
            l2=units.inductance(self.L2 * 1e-12),
            c1=units.capacitance(self.C1 * 1e-15),
            c2=units.capacitance(self.C2 * 1e-15),
            i1=units.current(self.I1 * 1e-6),
            i2=units.current(self.I2 * 1e-6),
            c12=units.capacitance(self.C12 * 1e-15),
            m12=units.inductance(self.M12 * 1e-12),
        )

    def to_dict(self) -> Dict[str, float]:
        """Convert to a dictionary keyed by unit-suffixed config names."""
        return {
            'L1_pH': self.L1,
            'L2_pH': self.L2,
            'C1_fF': self.C1,
            'C2_fF': self.C2,
            'I1_uA': self.I1,
            'I2_uA': self.I2,
            'C12_fF': self.C12,
            'M12_pH': self.M12,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CircuitParams':
        """Create from a dictionary keyed by unit-suffixed config names."""
        return cls(
            L1=float(data['L1_pH']),
            L2=float(data['L2_pH']),
            C1=float(data['C1_fF']),
            C2=float(data['C2_fF']),
            I1=float(data['I1_uA']),
            I2=float(data['I2_uA']),
            C12=float(data['C12_fF']),
            M12=float(data['M12_pH']),
        )


@dataclass(frozen=True)
class AnnealPoint:
    """Applied fluxes in internal units (the flux quantum is pi).

    ``phi_x`` is the transverse flux shared by both qubits, the biases are the
    coaxial fluxes of each loop.
    """

    phi_x: float
    phi1_z: float = 0.0
    phi2_z: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.phi_x <= math.pi * (1 + 1e-12):
            raise ParameterValidationError(
                f"phi_x must lie in [0, pi], got {self.phi_x}", self.phi_x)
        for name in ("phi1_z", "phi2_z"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterValidationError(f"{name} must be finite, got {value}", value)

    @classmethod
    def from_mphi0(cls, phi_x: float, bias1_mphi0: float = 0.0, bias2_mphi0: float = 0.0,
                   units: UnitSystem = INTERNAL_UNITS) -> 'AnnealPoint':
        """Build an anneal point from biases given in milli flux quanta."""
        return cls(phi_x=phi_x,
                   phi1_z=units.mphi0(bias1_mphi0),
                   phi2_z=units.mphi0(bias2_mphi0))

    def with_phi_x(self, phi_x: float) -> 'AnnealPoint':
        return AnnealPoint(phi_x=phi_x, phi1_z=self.phi1_z, phi2_z=self.phi2_z)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class NormalModeCoefficients:
    """Coefficients of the normal-mode Hamiltonian, all in internal units.

    The kinetic energy is ``c_plus*q1**2 + c_minus*q2**2``. The potential is
    ``l_minus*phi1**2 + l_plus*phi2**2 + l12*phi1*phi2`` plus two Josephson
    terms ``-e_i*cos(2*Phi_i)`` with ``Phi_1 = omega_cap1*(phi1+phi2) + phi1_z``
    and ``Phi_2 = omega_cap2*(phi2-phi1) + phi2_z``.
    """

    c_tilde1: float
    c_tilde2: float
    omega1: float
    omega2: float
    c_plus: float
    c_minus: float
    l_plus: float
    l_minus: float
    l12: float
    e1: float
    e2: float
    omega_cap1: float
    omega_cap2: float

    def __post_init__(self):
        if self.c_plus <= 0 or self.c_minus <= 0:
            raise ParameterValidationError(
                f"Kinetic coefficients must be positive, got ({self.c_plus}, {self.c_minus})")

    @property
    def kinetic(self) -> Tuple[float, float]:
        """Kinetic coefficients (mu_1, mu_2) of the two normal modes."""
        return (self.c_plus, self.c_minus)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class NormalModeHamiltonian:
    """A continuous Hamiltonian ``sum_k mu_k q_k**2 + V(phi)``.

    ``potential`` takes an array of shape ``(n_dims, ...)`` and returns the
    energy with the trailing shape. For circuit Hamiltonians ``flux_map`` and
    ``charge_map`` hold the linear maps from normal to physical coordinates
    (physical flux is ``flux_map @ phi + flux_offset``).
    """

    mu: Tuple[float, ...]
    potential: Callable[[np.ndarray], np.ndarray]
    coeffs: Optional[NormalModeCoefficients] = None
    anneal: Optional[AnnealPoint] = None
    flux_map: Optional[np.ndarray] = None
    flux_offset: Optional[np.ndarray] = None
    charge_map: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.mu) == 0:
            raise ParameterValidationError("At least one dimension is required")
        if any(m <= 0 for m in self.mu):
            raise ParameterValidationError(f"Kinetic coefficients must be positive, got {self.mu}")

    @property
    def n_dims(self) -> int:
        return len(self.mu)

    def physical_flux(self, phi: np.ndarray) -> np.ndarray:
        """Map normal coordinates of shape ``(n_dims, ...)`` to physical flux."""
        if self.flux_map is None:
            return np.asarray(phi, dtype=float)
        phi = np.asarray(phi, dtype=float)
        flat = phi.reshape(self.n_dims, -1)
        mapped = self.flux_map @ flat + np.asarray(self.flux_offset).reshape(-1, 1)
        return mapped.reshape(phi.shape)
