"""Exact-diagonalization reference engine.

Provides the lowest eigenpairs of a discretized Hamiltonian, certified
truncated thermal averages of diagonal observables and the persistent
currents derived from mean loop fluxes.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ..models.circuit import AnnealPoint, CircuitParams
from ..models.enums import EigenSolver
from ..models.grid import Grid, PmrHamiltonian
from ..models.thermal import EigenSet, ThermalAverage, ThermalSpec
from .discretization import apply, to_sparse
from .errors import NumericalError, TruncationError, UsageError
from .units import INTERNAL_UNITS, UnitSystem


logger = logging.getLogger(__name__)

DENSE_LIMIT = 4096
RESIDUAL_TOLERANCE = 1e-8
MAX_THERMAL_LEVELS = 64


def spectral_scale(h: PmrHamiltonian) -> float:
    """Gershgorin bound on the spectral radius."""
    return float(np.max(np.abs(h.d0)) + 2.0 * sum(abs(t) for t in h.hop))


def _residuals(h: PmrHamiltonian, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.array([np.linalg.norm(apply(h, vectors[:, i]) - values[i] * vectors[:, i])
                     for i in range(values.shape[0])])


def _rayleigh_ritz(h: PmrHamiltonian, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Re-orthogonalize a block of approximate eigenvectors and re-solve in its span."""
    q, _ = np.linalg.qr(vectors)
    hq = np.column_stack([apply(h, q[:, i]) for i in range(q.shape[1])])
    values, small = linalg.eigh(q.T @ hq)
    return values, q @ small


def _dense(h: PmrHamiltonian, k: int) -> Tuple[np.ndarray, np.ndarray]:
    values, vectors = linalg.eigh(to_sparse(h).toarray(), subset_by_index=[0, k - 1])
    return values, vectors


def _lanczos(h: PmrHamiltonian, k: int, maxiter: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    operator = LinearOperator((h.size, h.size), matvec=lambda x: apply(h, np.ravel(x)),
                              dtype=float)
    try:
        values, vectors = eigsh(operator, k=k, which="SA", maxiter=maxiter)
    except ArpackNoConvergence as e:
        residuals = _residuals(h, e.eigenvalues, e.eigenvectors) if len(e.eigenvalues) else []
        raise NumericalError(
            f"Lanczos did not converge: {len(e.eigenvalues)} of {k} eigenpairs", residuals) from e
    return _rayleigh_ritz(h, vectors)


def _shift_invert(h: PmrHamiltonian, k: int, maxiter: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    # the potential minimum bounds the spectrum from below
    sigma = float(np.min(h.potential_values)) - 1.0
    try:
        values, vectors = eigsh(to_sparse(h).tocsc(), k=k, sigma=sigma, which="LM", maxiter=maxiter)
    except ArpackNoConvergence as e:
        residuals = _residuals(h, e.eigenvalues, e.eigenvectors) if len(e.eigenvalues) else []
        raise NumericalError(
            f"Shift-invert did not converge: {len(e.eigenvalues)} of {k} eigenpairs", residuals) from e
    return _rayleigh_ritz(h, vectors)


def lowest_eigenpairs(h: PmrHamiltonian, k: int, solver: EigenSolver = EigenSolver.AUTO,
                      maxiter: Optional[int] = None) -> EigenSet:
    """Compute the ``k`` lowest eigenpairs.

    Args:
        h: Discretized Hamiltonian
        k: Number of eigenpairs
        solver: Back-end; ``AUTO`` picks dense up to 4096 states, Lanczos above
        maxiter: Iteration budget of the ARPACK back-ends

    Returns:
        EigenSet: Ascending eigenvalues, orthonormal vectors and residual norms

    Raises:
        UsageError: If ``k`` is outside ``[1, dimension]``
        NumericalError: If the solver fails or a residual exceeds tolerance
    """
    if not 1 <= k <= h.size:
        raise UsageError(f"Requested {k} eigenpairs of a {h.size}-dimensional Hamiltonian")

    if solver is EigenSolver.AUTO:
        solver = EigenSolver.DENSE if h.size <= DENSE_LIMIT else EigenSolver.LANCZOS
    if solver is not EigenSolver.DENSE and k >= h.size - 1:
        solver = EigenSolver.DENSE

    if solver is EigenSolver.DENSE:
        values, vectors = _dense(h, k)
    elif solver is EigenSolver.LANCZOS:
        values, vectors = _lanczos(h, k, maxiter)
    else:
        values, vectors = _shift_invert(h, k, maxiter)

    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    residuals = _residuals(h, values, vectors)

    limit = RESIDUAL_TOLERANCE * spectral_scale(h)
    if np.any(residuals > limit):
        raise NumericalError(
            f"Eigenpair residual {residuals.max():.3g} exceeds {limit:.3g}", residuals)

    logger.info(f"Solved {k} eigenpairs of {h.size} states with {solver} "
                f"(E0={values[0]:.6g}, max residual {residuals.max():.2g})")
    return EigenSet(values=values, vectors=vectors, residuals=residuals)


def relative_weights(eig: EigenSet, spec: ThermalSpec) -> np.ndarray:
    return np.exp(-spec.beta * (eig.values - eig.values[0]))


def thermal_eigenpairs(h: PmrHamiltonian, spec: ThermalSpec, k_start: int = 8,
                       k_max: int = MAX_THERMAL_LEVELS,
                       solver: EigenSolver = EigenSolver.AUTO) -> EigenSet:
    """Grow the eigenpair count until the last retained level is negligible.

    The count doubles until ``exp(-beta (E_{k-1} - E_0))`` drops below the
    truncation tolerance, capped at ``k_max`` or the dimension.
    """
    cap = min(k_max, h.size)
    k = min(k_start, cap)
    while True:
        eig = lowest_eigenpairs(h, k, solver)
        w_last = relative_weights(eig, spec)[-1]
        if w_last <= spec.truncation_tolerance or k >= h.size:
            return eig
        if k >= cap:
            logger.warning(f"Last retained Boltzmann weight {w_last:.3g} above tolerance "
                           f"with {k} eigenpairs")
            return eig
        k = min(2 * k, cap)
        logger.debug(f"Growing eigenpair count to {k}")


def thermal_average(obs: np.ndarray, eig: EigenSet, spec: ThermalSpec) -> ThermalAverage:
    """Truncated thermal average of a diagonal observable.

    Args:
        obs: Observable values over the grid points
        eig: Retained eigenpairs
        spec: Thermal ensemble

    Returns:
        ThermalAverage: Value and rigorous truncation bound

    Raises:
        UsageError: If ``obs`` does not match the eigenvector length
        TruncationError: If the last retained weight exceeds the tolerance
    """
    obs = np.asarray(obs, dtype=float).reshape(-1)
    if obs.shape[0] != eig.dimension:
        raise UsageError(f"Observable has {obs.shape[0]} values, expected {eig.dimension}")

    weights = relative_weights(eig, spec)
    z = float(weights.sum())
    expectations = np.einsum("im,i,im->m", eig.vectors, obs, eig.vectors)
    value = float(expectations @ weights / z)

    if eig.count >= eig.dimension:
        return ThermalAverage(value=value, bound=0.0, levels=eig.count)

    w_last = float(weights[-1])
    if w_last > spec.truncation_tolerance:
        raise TruncationError(
            f"Boltzmann weight {w_last:.3g} of level {eig.count - 1} exceeds "
            f"{spec.truncation_tolerance:.3g}; request more eigenpairs")

    sup = float(np.max(np.abs(obs)))
    bound = 2.0 * sup * (eig.dimension - eig.count) * w_last / z
    return ThermalAverage(value=value, bound=bound, levels=eig.count)


def mean_flux(eig: EigenSet, spec: ThermalSpec, grid: Grid,
              transform: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Tuple[ThermalAverage, ...]:
    """Thermal averages of the physical fluxes.

    Args:
        eig: Retained eigenpairs
        spec: Thermal ensemble
        grid: Grid the eigenvectors live on
        transform: ``(A, b)`` mapping grid coordinates to physical flux, identity if None

    Returns:
        Tuple[ThermalAverage, ...]: One average per physical flux
    """
    coords = grid.coordinates().reshape(grid.n_dims, -1)
    if transform is None:
        physical = coords
    else:
        a, b = transform
        physical = np.asarray(a) @ coords + np.asarray(b).reshape(-1, 1)
    return tuple(thermal_average(physical[j], eig, spec) for j in range(physical.shape[0]))


def persistent_currents(mean_Phi1: float, mean_Phi2: float, anneal: AnnealPoint,
                        params: CircuitParams,
                        units: UnitSystem = INTERNAL_UNITS) -> Tuple[float, float]:
    """Loop currents from mean fluxes, in internal current units.

    The mutual-inductance denominator is read as L1*L2.
    """
    c = params.to_internal(units)
    x1 = mean_Phi1 - anneal.phi1_z
    x2 = mean_Phi2 - anneal.phi2_z
    coupling = c.m12 / (c.l1 * c.l2)
    return x1 / c.l1 + coupling * x2, x2 / c.l2 + coupling * x1


def currents_nanoampere(currents: Tuple[float, float],
                        units: UnitSystem = INTERNAL_UNITS) -> Tuple[float, float]:
    return tuple(units.current_to_si(i) * 1e9 for i in currents)

