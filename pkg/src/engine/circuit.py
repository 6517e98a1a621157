"""Two coupled rf-SQUIDs: configuration loading, raw potential and normal modes.

Everything here works in the internal unit system of ``units.py``. The
normal-mode coordinates remove the capacitive charge coupling so that the
kinetic energy is a sum of independent quadratic terms; each coefficient of
the transformed Hamiltonian sits behind its own function.
"""

import logging
import math
import sys
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from scipy import ndimage

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..models.circuit import (
    AnnealPoint,
    CircuitParams,
    InternalCircuit,
    NormalModeCoefficients,
    NormalModeHamiltonian,
)
from .errors import ConfigurationError, ModelError, ParameterValidationError
from .params_validator import CircuitValidator
from .units import INTERNAL_UNITS, UnitSystem


logger = logging.getLogger(__name__)


def parse_circuit_document(config_text: str) -> Dict[str, Any]:
    """Parse and key-check a circuit document.

    Args:
        config_text: TOML text with unit-suffixed keys

    Returns:
        Dict[str, Any]: The parsed key/value pairs

    Raises:
        ConfigurationError: If the text is not valid TOML or keys are wrong
    """
    try:
        data = tomllib.loads(config_text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Circuit document is not valid TOML: {e}") from e

    CircuitValidator.validate_keys(data)
    return data


def load_params(config_text: str) -> CircuitParams:
    """Load validated circuit parameters from a circuit document.

    Every value problem in the document is reported in one error.

    Raises:
        ConfigurationError: If a key is missing, unknown or not numeric
        ParameterValidationError: If values violate circuit invariants
    """
    data = parse_circuit_document(config_text)
    errors = CircuitValidator.validate_params(data)
    if errors:
        raise ParameterValidationError(f"Invalid circuit document: {'; '.join(errors)}", errors)
    params = CircuitParams.from_dict(data)
    logger.debug(f"Loaded circuit parameters: {params}")
    return params


def default_biases(config_text: str) -> Tuple[float, float]:
    """Return the optional coaxial biases of a document in milli flux quanta."""
    data = parse_circuit_document(config_text)
    for key in CircuitValidator.OPTIONAL_KEYS:
        if key in data:
            CircuitValidator.validate_bias(key, float(data[key]))
    return (float(data.get("phi1_z_mphi0", 0.0)), float(data.get("phi2_z_mphi0", 0.0)))


# Individual coefficient functions. Each is a total function on validated input.

def effective_capacitances(c: InternalCircuit) -> Tuple[float, float]:
    """Capacitances seen by each loop once the coupling capacitor is eliminated."""
    det = c.c1 * c.c2 + c.c12 * (c.c1 + c.c2)
    return det / (c.c2 + c.c12), det / (c.c1 + c.c12)


def charge_coupling(c: InternalCircuit) -> float:
    """Coefficient kappa of the Q1*Q2 term of the raw kinetic energy."""
    det = c.c1 * c.c2 + c.c12 * (c.c1 + c.c2)
    return c.c12 / det


def mode_frequency(inductance: float, c_tilde: float) -> float:
    return 1.0 / math.sqrt(inductance * c_tilde)


def reduced_charge_coupling(c: InternalCircuit) -> float:
    """Dimensionless coupling kappa*sqrt(C~1*C~2), always in [0, 1)."""
    ct1, ct2 = effective_capacitances(c)
    return charge_coupling(c) * math.sqrt(ct1 * ct2)


def kinetic_coefficients(c: InternalCircuit) -> Tuple[float, float]:
    """Return (c_plus, c_minus), the charge-squared coefficients of each mode."""
    ct1, ct2 = effective_capacitances(c)
    w1, w2 = mode_frequency(c.l1, ct1), mode_frequency(c.l2, ct2)
    k = reduced_charge_coupling(c)
    scale = 2.0 * math.sqrt(w1 * w2)
    return scale * (1.0 - k), scale * (1.0 + k)


def mutual_inductance_term(c: InternalCircuit) -> float:
    """Mutual-inductance contribution shared by l_plus and l_minus.

    The product in the denominator is read as L1*L2.
    """
    ct1, ct2 = effective_capacitances(c)
    w1, w2 = mode_frequency(c.l1, ct1), mode_frequency(c.l2, ct2)
    return c.m12 / (8.0 * c.l1 * c.l2 * math.sqrt(ct1 * ct2 * w1 * w2))


def quadratic_coefficients(c: InternalCircuit) -> Tuple[float, float]:
    """Return (l_plus, l_minus), the phi2**2 and phi1**2 coefficients."""
    ct1, ct2 = effective_capacitances(c)
    w1, w2 = mode_frequency(c.l1, ct1), mode_frequency(c.l2, ct2)
    base = (w1 ** 2 + w2 ** 2) / (16.0 * math.sqrt(w1 * w2))
    m = mutual_inductance_term(c)
    return base + m, base - m


def residual_flux_coupling(c: InternalCircuit) -> float:
    """Coefficient l12 of phi1*phi2; positive when omega1 > omega2."""
    ct1, ct2 = effective_capacitances(c)
    w1, w2 = mode_frequency(c.l1, ct1), mode_frequency(c.l2, ct2)
    return (w1 ** 2 - w2 ** 2) / (8.0 * math.sqrt(w1 * w2))


def flux_scales(c: InternalCircuit) -> Tuple[float, float]:
    """Return (Omega1, Omega2) scaling the normal fluxes inside the cosines."""
    ct1, ct2 = effective_capacitances(c)
    w1, w2 = mode_frequency(c.l1, ct1), mode_frequency(c.l2, ct2)
    root = math.sqrt(w1 * w2)
    return 1.0 / math.sqrt(8.0 * ct1 * root), 1.0 / math.sqrt(8.0 * ct2 * root)


def josephson_amplitude(critical_current: float, phi_x: float,
                        units: UnitSystem = INTERNAL_UNITS) -> float:
    """Tunable Josephson energy (phi0/2pi)*I*cos(pi*phi_x/phi0)."""
    return units.phi0 / (2.0 * math.pi) * critical_current * math.cos(math.pi * phi_x / units.phi0)


def normal_mode_coefficients(params: CircuitParams, anneal: AnnealPoint,
                             units: UnitSystem = INTERNAL_UNITS) -> NormalModeCoefficients:
    """Evaluate every coefficient of the normal-mode Hamiltonian."""
    c = params.to_internal(units)
    ct1, ct2 = effective_capacitances(c)
    c_plus, c_minus = kinetic_coefficients(c)
    l_plus, l_minus = quadratic_coefficients(c)
    cap1, cap2 = flux_scales(c)

    return NormalModeCoefficients(
        c_tilde1=ct1,
        c_tilde2=ct2,
        omega1=mode_frequency(c.l1, ct1),
        omega2=mode_frequency(c.l2, ct2),
        c_plus=c_plus,
        c_minus=c_minus,
        l_plus=l_plus,
        l_minus=l_minus,
        l12=residual_flux_coupling(c),
        e1=josephson_amplitude(c.i1, anneal.phi_x, units),
        e2=josephson_amplitude(c.i2, anneal.phi_x, units),
        omega_cap1=cap1,
        omega_cap2=cap2,
    )


def raw_potential(Phi1, Phi2, anneal: AnnealPoint, params: CircuitParams,
                  units: UnitSystem = INTERNAL_UNITS):
    """Potential energy of the untransformed two-loop Hamiltonian.

    Accepts scalars or broadcastable arrays of physical flux.
    """
    c = params.to_internal(units)
    x1 = np.asarray(Phi1, dtype=float) - anneal.phi1_z
    x2 = np.asarray(Phi2, dtype=float) - anneal.phi2_z
    e1 = josephson_amplitude(c.i1, anneal.phi_x, units)
    e2 = josephson_amplitude(c.i2, anneal.phi_x, units)
    k = 2.0 * math.pi / units.phi0

    return (x1 ** 2 / (2.0 * c.l1) + x2 ** 2 / (2.0 * c.l2)
            + c.m12 * x1 * x2 / (c.l1 * c.l2)
            - e1 * np.cos(k * np.asarray(Phi1, dtype=float))
            - e2 * np.cos(k * np.asarray(Phi2, dtype=float)))


def to_physical(phi1, phi2, anneal: AnnealPoint, coeffs: NormalModeCoefficients):
    """Map normal fluxes to the physical loop fluxes (Phi1, Phi2)."""
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    return (coeffs.omega_cap1 * (phi1 + phi2) + anneal.phi1_z,
            coeffs.omega_cap2 * (phi2 - phi1) + anneal.phi2_z)


def to_normal(Phi1, Phi2, anneal: AnnealPoint, coeffs: NormalModeCoefficients):
    """Inverse of :func:`to_physical`."""
    s = (np.asarray(Phi1, dtype=float) - anneal.phi1_z) / coeffs.omega_cap1
    d = (np.asarray(Phi2, dtype=float) - anneal.phi2_z) / coeffs.omega_cap2
    return 0.5 * (s - d), 0.5 * (s + d)


def normal_potential(phi1, phi2, anneal: AnnealPoint, coeffs: NormalModeCoefficients,
                     units: UnitSystem = INTERNAL_UNITS):
    """Potential energy in normal-mode coordinates."""
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    Phi1, Phi2 = to_physical(phi1, phi2, anneal, coeffs)
    k = 2.0 * math.pi / units.phi0

    return (coeffs.l_minus * phi1 ** 2 + coeffs.l_plus * phi2 ** 2
            + coeffs.l12 * phi1 * phi2
            - coeffs.e1 * np.cos(k * Phi1)
            - coeffs.e2 * np.cos(k * Phi2))


def flux_transform(coeffs: NormalModeCoefficients, anneal: AnnealPoint) -> Tuple[np.ndarray, np.ndarray]:
    """Return (A, b) with physical flux = A @ phi + b."""
    a = np.array([[coeffs.omega_cap1, coeffs.omega_cap1],
                  [-coeffs.omega_cap2, coeffs.omega_cap2]])
    return a, np.array([anneal.phi1_z, anneal.phi2_z])


def charge_transform(coeffs: NormalModeCoefficients) -> np.ndarray:
    """Return B with physical charge = B @ q; B.T @ A is the identity."""
    return np.array([[0.5 / coeffs.omega_cap1, 0.5 / coeffs.omega_cap1],
                     [-0.5 / coeffs.omega_cap2, 0.5 / coeffs.omega_cap2]])


def phase_space_map(coeffs: NormalModeCoefficients, anneal: AnnealPoint) -> np.ndarray:
    """Linear part of (phi1, phi2, q1, q2) -> (Phi1, Phi2, Q1, Q2)."""
    a, _ = flux_transform(coeffs, anneal)
    m = np.zeros((4, 4))
    m[:2, :2] = a
    m[2:, 2:] = charge_transform(coeffs)
    return m


SYMPLECTIC_FORM = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
CANONICAL_TOLERANCE = 1e-9


def check_canonical(m: np.ndarray, tolerance: float = CANONICAL_TOLERANCE) -> None:
    """Require a phase-space map to preserve the symplectic form.

    Raises:
        ModelError: If ``m.T @ J @ m`` differs from ``J``
    """
    residual = float(np.max(np.abs(m.T @ SYMPLECTIC_FORM @ m - SYMPLECTIC_FORM)))
    if residual > tolerance:
        raise ModelError(f"Normal-mode map is not canonical (residual {residual:.3g})")


def normal_mode_hamiltonian(params: CircuitParams, anneal: AnnealPoint,
                            units: UnitSystem = INTERNAL_UNITS) -> NormalModeHamiltonian:
    """Assemble the continuous normal-mode Hamiltonian for one anneal point."""
    coeffs = normal_mode_coefficients(params, anneal, units)
    a, b = flux_transform(coeffs, anneal)
    check_canonical(phase_space_map(coeffs, anneal))

    def potential(phi: np.ndarray) -> np.ndarray:
        return normal_potential(phi[0], phi[1], anneal, coeffs, units)

    return NormalModeHamiltonian(
        mu=coeffs.kinetic,
        potential=potential,
        coeffs=coeffs,
        anneal=anneal,
        flux_map=a,
        flux_offset=b,
        charge_map=charge_transform(coeffs),
    )


def raw_kinetic_coefficients(params: CircuitParams,
                             units: UnitSystem = INTERNAL_UNITS) -> Tuple[float, float, float]:
    """Return (1/(2 C~1), 1/(2 C~2), kappa) of the raw charge Hamiltonian."""
    c = params.to_internal(units)
    ct1, ct2 = effective_capacitances(c)
    return 0.5 / ct1, 0.5 / ct2, charge_coupling(c)


def potential_surface_export(anneal: AnnealPoint, coeffs: NormalModeCoefficients,
                             phi1_values: Sequence[float], phi2_values: Sequence[float],
                             units: UnitSystem = INTERNAL_UNITS) -> np.ndarray:
    """Sample the normal-mode potential on a rectangular grid.

    Returns:
        np.ndarray: Rows of (phi1, phi2, V), phi2 varying fastest
    """
    p1 = np.asarray(phi1_values, dtype=float)
    p2 = np.asarray(phi2_values, dtype=float)
    if p1.size == 0 or p2.size == 0:
        return np.empty((0, 3))

    g1, g2 = np.meshgrid(p1, p2, indexing="ij")
    v = normal_potential(g1, g2, anneal, coeffs, units)
    return np.column_stack([g1.ravel(), g2.ravel(), v.ravel()])


def local_minima(values: np.ndarray) -> List[Tuple[int, ...]]:
    """Indices of strict discrete local minima of a sampled surface."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    footprint = np.ones((3,) * values.ndim, dtype=bool)
    footprint[(1,) * values.ndim] = False
    neighbours = ndimage.minimum_filter(values, footprint=footprint,
                                        mode="constant", cval=np.inf)
    return [tuple(int(i) for i in idx) for idx in np.argwhere(values < neighbours)]


def surface_minima(table: np.ndarray) -> List[Tuple[float, float]]:
    """Locate local minima in a table produced by :func:`potential_surface_export`."""
    if table.shape[0] == 0:
        return []
    p1 = np.unique(table[:, 0])
    p2 = np.unique(table[:, 1])
    v = table[:, 2].reshape(p1.size, p2.size)
    return [(float(p1[i]), float(p2[j])) for i, j in local_minima(v)]
