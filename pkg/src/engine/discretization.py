"""Finite-difference discretization onto equally spaced flux grids.

The discretized Hamiltonian keeps the permutation-matrix form
``H = D0 + sum_k hop_k (P_{+k} + P_{-k})`` with hard-wall boundaries: shifts
that leave the grid contribute nothing.
"""

import logging
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from ..models.circuit import AnnealPoint, CircuitParams, NormalModeCoefficients, NormalModeHamiltonian
from ..models.enums import BoundaryPolicy
from ..models.grid import Grid, PmrHamiltonian, StoquasticityReport
from .circuit import local_minima, normal_potential, raw_kinetic_coefficients, raw_potential
from .errors import ModelError, UsageError
from .units import INTERNAL_UNITS, REFERENCE_TEMPERATURE_K, UnitSystem


logger = logging.getLogger(__name__)

Potential = Callable[[np.ndarray], np.ndarray]

DEFAULT_MARGIN = 2000.0
MAX_BRACKET_DOUBLINGS = 40
BISECTION_STEPS = 60
TRIAL_BUDGET = 40_000


def _trial_axis(center: float, half_width: float, n_dims: int) -> np.ndarray:
    n = max(21, int(round(TRIAL_BUDGET ** (1.0 / n_dims))))
    n += 1 - n % 2
    return np.linspace(center - half_width, center + half_width, n)


def _box_minimum(potential: Potential, center: np.ndarray, half_width: float) -> float:
    axes = [_trial_axis(c, half_width, len(center)) for c in center]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"))
    return float(np.min(potential(mesh)))


def _face_minimum(potential: Potential, center: np.ndarray, axis: int,
                  offset: float, half_width: float) -> float:
    """Minimum of the potential over both hyperplanes ``x_axis = center +- offset``."""
    n_dims = len(center)
    face_min = math.inf
    for sign in (-1.0, 1.0):
        axes = [_trial_axis(c, half_width, max(n_dims - 1, 1)) for c in center]
        axes[axis] = np.array([center[axis] + sign * offset])
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"))
        face_min = min(face_min, float(np.min(potential(mesh))))
    return face_min


def build_grid_for_potential(potential: Potential, n_dims: int, delta: float, margin: float,
                             center: Optional[Sequence[float]] = None,
                             units: UnitSystem = INTERNAL_UNITS) -> Grid:
    """Choose per-axis extents so every boundary face sits high above the minimum.

    Each face must exceed the global minimum by at least
    ``margin * k_B * T_ref`` with ``T_ref`` = 12 mK.

    Args:
        potential: Vectorized potential taking coordinates of shape ``(n_dims, ...)``
        n_dims: Number of axes
        delta: Grid spacing
        margin: Energy margin in units of ``k_B * T_ref``, must exceed 1
        center: Grid center, the origin by default

    Returns:
        Grid: Grid with odd point counts centered on ``center``

    Raises:
        UsageError: If ``delta`` is not positive or ``margin`` is not above 1
        ModelError: If no extent brackets the potential
    """
    if not delta > 0:
        raise UsageError(f"Grid spacing must be positive, got {delta}")
    if not margin > 1:
        raise UsageError(f"Margin must exceed 1, got {margin}")

    center = np.zeros(n_dims) if center is None else np.asarray(center, dtype=float)
    offset = margin * units.thermal_energy(REFERENCE_TEMPERATURE_K)

    half_width = max(8.0 * delta, 1.0)
    for _ in range(MAX_BRACKET_DOUBLINGS):
        v_min = _box_minimum(potential, center, half_width)
        if all(_face_minimum(potential, center, k, half_width, half_width) >= v_min + offset
               for k in range(n_dims)):
            break
        half_width *= 2.0
    else:
        raise ModelError(
            f"Could not bracket the potential within half-width {half_width:.3g}; "
            "it may be unbounded below")

    half_widths = []
    for k in range(n_dims):
        lo, hi = 0.0, half_width
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if _face_minimum(potential, center, k, mid, half_width) >= v_min + offset:
                hi = mid
            else:
                lo = mid
        half_widths.append(hi)

    counts = []
    for h in half_widths:
        n = max(3, int(math.ceil(2.0 * h / delta)))
        counts.append(n + 1 - n % 2)

    grid = Grid(n_dims=n_dims, delta=float(delta), points_per_dim=tuple(counts),
                origin_offset=tuple(float(c) for c in center))
    logger.info(f"Built grid {grid.shape} with spacing {delta} ({grid.size} states)")
    return grid


def build_grid(coeffs: NormalModeCoefficients, anneal: AnnealPoint, delta: float,
               margin: float = DEFAULT_MARGIN, units: UnitSystem = INTERNAL_UNITS) -> Grid:
    """Build a normal-coordinate grid for the circuit potential at one anneal point."""
    def potential(phi: np.ndarray) -> np.ndarray:
        return normal_potential(phi[0], phi[1], anneal, coeffs, units)

    return build_grid_for_potential(potential, 2, delta, margin, units=units)


def build_raw_grid(params: CircuitParams, anneal: AnnealPoint, delta: float,
                   margin: float = DEFAULT_MARGIN, units: UnitSystem = INTERNAL_UNITS) -> Grid:
    """Build a physical-flux grid centered on the biases (same margin rule)."""
    def potential(flux: np.ndarray) -> np.ndarray:
        return raw_potential(flux[0], flux[1], anneal, params, units)

    return build_grid_for_potential(potential, 2, delta, margin,
                                    center=(anneal.phi1_z, anneal.phi2_z), units=units)


def discretize(h: NormalModeHamiltonian, grid: Grid) -> PmrHamiltonian:
    """Discretize ``sum_k mu_k q_k**2 + V`` with first-order finite differences."""
    if h.n_dims != grid.n_dims:
        raise UsageError(f"Hamiltonian has {h.n_dims} dimensions but grid has {grid.n_dims}")

    inv_d2 = 1.0 / grid.delta ** 2
    potential = np.asarray(h.potential(grid.coordinates()), dtype=float).reshape(-1)
    d0 = potential + sum(2.0 * m * inv_d2 for m in h.mu)
    hop = tuple(-m * inv_d2 for m in h.mu)

    logger.debug(f"Discretized {grid.size} states, hopping strengths {hop}")
    return PmrHamiltonian(d0=d0, hop=hop, grid=grid, mu=tuple(float(m) for m in h.mu),
                          boundary=BoundaryPolicy.DIRICHLET)


def apply(h: PmrHamiltonian, state: np.ndarray) -> np.ndarray:
    """Matrix-free product ``H @ state``."""
    state = np.asarray(state)
    if state.shape != (h.size,):
        raise UsageError(f"State has shape {state.shape}, expected ({h.size},)")

    x = state.reshape(h.grid.shape)
    y = h.d0.reshape(h.grid.shape) * x
    for k, t in enumerate(h.hop):
        if h.grid.shape[k] < 2:
            continue
        upper = [slice(None)] * h.n_dims
        lower = [slice(None)] * h.n_dims
        upper[k] = slice(1, None)
        lower[k] = slice(None, -1)
        y[tuple(lower)] += t * x[tuple(upper)]
        y[tuple(upper)] += t * x[tuple(lower)]
    return y.reshape(-1)


def to_sparse(h: PmrHamiltonian) -> sparse.csr_matrix:
    """Assemble the Hamiltonian as a CSR matrix."""
    shape = h.grid.shape
    matrix = sparse.diags(np.asarray(h.d0, dtype=float), 0, format="csr")
    for k, t in enumerate(h.hop):
        n = shape[k]
        if n < 2:
            continue
        axis_hop = sparse.diags([np.full(n - 1, t), np.full(n - 1, t)], [-1, 1])
        term = sparse.identity(1, format="csr")
        for j, nj in enumerate(shape):
            term = sparse.kron(term, axis_hop if j == k else sparse.identity(nj), format="csr")
        matrix = matrix + term
    return matrix.tocsr()


def dump_matrix(h: Union[PmrHamiltonian, sparse.spmatrix], path: Path) -> int:
    """Write the stored matrix elements as ``row col value`` lines.

    Returns:
        int: Number of elements written
    """
    matrix = to_sparse(h) if isinstance(h, PmrHamiltonian) else sparse.coo_matrix(h)
    coo = matrix.tocoo()
    table = np.column_stack([coo.row, coo.col, coo.data])
    np.savetxt(path, table, fmt=["%d", "%d", "%.17g"], delimiter=" ")
    logger.info(f"Wrote {coo.nnz} matrix elements to {path}")
    return int(coo.nnz)


def stoquasticity_report(h: Union[PmrHamiltonian, sparse.spmatrix, np.ndarray]) -> StoquasticityReport:
    """Scan every stored off-diagonal element for positive entries."""
    if isinstance(h, PmrHamiltonian):
        coo = to_sparse(h).tocoo()
        shift = h.kinetic_shift
    else:
        coo = sparse.coo_matrix(h)
        shift = 0.0

    off = coo.row != coo.col
    values = coo.data[off]
    values = values[values != 0]
    report = StoquasticityReport(
        max_off_diagonal=float(values.max()) if values.size else 0.0,
        positive_off_diagonals=int(np.count_nonzero(values > 0)),
        off_diagonal_count=int(values.size),
        diagonal_shift=float(shift),
    )
    if not report.stoquastic:
        logger.warning(f"Matrix has {report.positive_off_diagonals} positive off-diagonal elements")
    return report


def raw_circuit_matrix(params: CircuitParams, anneal: AnnealPoint, grid: Grid,
                       units: UnitSystem = INTERNAL_UNITS) -> sparse.csr_matrix:
    """Discretize the untransformed circuit Hamiltonian on a physical-flux grid.

    The charge cross term ``kappa*Q1*Q2`` becomes ``-kappa*D1*D2`` with
    central first differences, which produces positive off-diagonal elements.
    """
    if grid.n_dims != 2:
        raise UsageError(f"The circuit has two loops, got a {grid.n_dims}-dimensional grid")

    t1, t2, kappa = raw_kinetic_coefficients(params, units)
    n1, n2 = grid.shape
    d = grid.delta

    flux = grid.coordinates()
    v = raw_potential(flux[0], flux[1], anneal, params, units).reshape(-1)

    def second(n: int, coeff: float) -> sparse.spmatrix:
        return sparse.diags([np.full(n - 1, -coeff / d ** 2), np.full(n, 2.0 * coeff / d ** 2),
                             np.full(n - 1, -coeff / d ** 2)], [-1, 0, 1])

    def central(n: int) -> sparse.spmatrix:
        return sparse.diags([np.full(n - 1, -0.5 / d), np.full(n - 1, 0.5 / d)], [-1, 1])

    kinetic = (sparse.kron(second(n1, t1), sparse.identity(n2))
               + sparse.kron(sparse.identity(n1), second(n2, t2))
               - kappa * sparse.kron(central(n1), central(n2)))
    return (kinetic + sparse.diags(v, 0)).tocsr()


def long_step_for(h: PmrHamiltonian) -> int:
    """Long-move step from the separation of wells that differ along one axis.

    Falls back to half the largest axis when fewer than two wells exist.
    """
    minima = local_minima(h.d0.reshape(h.grid.shape))
    candidates = []
    for a in range(len(minima)):
        for b in range(a + 1, len(minima)):
            diff = np.abs(np.subtract(minima[a], minima[b]))
            axis = int(np.argmax(diff))
            others = np.delete(diff, axis)
            if diff[axis] > 0 and np.all(others <= 0.25 * diff[axis]):
                candidates.append(int(diff[axis]))

    if candidates:
        step = min(candidates)
    else:
        step = max(h.grid.shape) // 2
        logger.debug(f"{len(minima)} wells found, using fallback long step {step}")
    return max(2, int(step))
