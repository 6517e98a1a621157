"""Anneal sweeps, qubit readout and grid-spacing convergence studies."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.anneal import (
    AnnealSchedule,
    ConvergenceRow,
    ConvergenceStudy,
    GridSpec,
    QmcBudget,
    ReadoutRow,
)
from ..models.circuit import AnnealPoint, CircuitParams, NormalModeHamiltonian
from ..models.enums import EigenSolver, Engine, QubitLabel
from ..models.grid import Grid, PmrHamiltonian
from ..models.qmc import MoveParams, RunStats
from ..models.thermal import ThermalSpec
from .circuit import normal_mode_hamiltonian
from .discretization import build_grid, discretize, long_step_for
from .errors import FluxStoqError, InvariantViolationError, UsageError
from .exact import currents_nanoampere, mean_flux, persistent_currents, thermal_eigenpairs
from .qmc import run_chains, worker_limit
from .units import INTERNAL_UNITS


logger = logging.getLogger(__name__)

READOUT_SIGMAS = 3.0


def readout(i1: float, i2: float, errors: Tuple[float, float] = (0.0, 0.0)) -> QubitLabel:
    """Map current signs to a two-qubit label; positive reads as 0, negative as 1.

    A current that is exactly zero or smaller than three standard errors makes
    the readout indeterminate.
    """
    for current, error in zip((i1, i2), errors):
        if current == 0 or abs(current) < READOUT_SIGMAS * error:
            return QubitLabel.INDETERMINATE
    return QubitLabel.from_bits(int(i1 < 0), int(i2 < 0))


@dataclass(frozen=True)
class PointModel:
    """Everything built for one anneal point before an engine runs."""

    hamiltonian: NormalModeHamiltonian
    grid: Grid
    pmr: PmrHamiltonian


def build_point(params: CircuitParams, anneal: AnnealPoint, grid_spec: GridSpec) -> PointModel:
    """Normal-mode Hamiltonian, grid and discretization at one anneal point."""
    continuous = normal_mode_hamiltonian(params, anneal)
    grid = build_grid(continuous.coeffs, anneal, grid_spec.delta, grid_spec.margin)
    return PointModel(hamiltonian=continuous, grid=grid, pmr=discretize(continuous, grid))


def _current_errors(params: CircuitParams, errors: Tuple[float, float]) -> Tuple[float, float]:
    """Propagate flux uncertainties through the linear current map (nA)."""
    c = params.to_internal(INTERNAL_UNITS)
    k = abs(c.m12) / (c.l1 * c.l2)
    s1 = math.hypot(errors[0] / c.l1, k * errors[1])
    s2 = math.hypot(errors[1] / c.l2, k * errors[0])
    return currents_nanoampere((s1, s2))


def exact_point(params: CircuitParams, anneal: AnnealPoint, grid_spec: GridSpec,
                thermal: ThermalSpec, solver: EigenSolver = EigenSolver.SHIFT_INVERT,
                model: Optional[PointModel] = None) -> ReadoutRow:
    """Evaluate persistent currents at one anneal point by exact diagonalization."""
    model = model or build_point(params, anneal, grid_spec)
    eig = thermal_eigenpairs(model.pmr, thermal, solver=solver)
    transform = (model.hamiltonian.flux_map, model.hamiltonian.flux_offset)
    flux1, flux2 = mean_flux(eig, thermal, model.grid, transform)

    currents = currents_nanoampere(persistent_currents(flux1.value, flux2.value, anneal, params))
    errors = _current_errors(params, (flux1.bound, flux2.bound))
    return ReadoutRow(
        phi_x=anneal.phi_x,
        engine=Engine.ED,
        i1=currents[0],
        i2=currents[1],
        i1_error=errors[0],
        i2_error=errors[1],
        label=readout(currents[0], currents[1], errors),
        e0=float(eig.values[0]),
        e1=float(eig.values[1]) if eig.count > 1 else None,
        trunc_bound=max(flux1.bound, flux2.bound),
    )


def qmc_point(params: CircuitParams, anneal: AnnealPoint, grid_spec: GridSpec,
              thermal: ThermalSpec, budget: QmcBudget, seed: int,
              chain_workers: Optional[int] = 1, model: Optional[PointModel] = None,
              keep_samples: bool = False) -> Tuple[ReadoutRow, RunStats]:
    """Evaluate persistent currents at one anneal point by Monte Carlo."""
    model = model or build_point(params, anneal, grid_spec)
    h = model.pmr
    flux = model.hamiltonian.physical_flux(model.grid.coordinates()).reshape(2, -1)
    move_params = MoveParams(long_step=long_step_for(h), move_mix=budget.move_mix, rng_seed=seed)

    stats, _ = run_chains(h, thermal.beta, move_params, budget.n_sweeps,
                          {'Phi1': flux[0], 'Phi2': flux[1]}, n_chains=budget.n_chains,
                          workers=chain_workers, burn_in=budget.burn_in, n_bins=budget.n_bins,
                          keep_samples=keep_samples)

    phi1, phi2 = stats.estimates['Phi1'], stats.estimates['Phi2']
    currents = currents_nanoampere(persistent_currents(phi1.mean, phi2.mean, anneal, params))
    errors = _current_errors(params, (phi1.error, phi2.error))
    row = ReadoutRow(
        phi_x=anneal.phi_x,
        engine=Engine.QMC,
        i1=currents[0],
        i2=currents[1],
        i1_error=errors[0],
        i2_error=errors[1],
        label=readout(currents[0], currents[1], errors),
    )
    return row, stats


def point_seeds(root_seed: int, count: int) -> List[int]:
    """Independent 64-bit seeds for each anneal point."""
    children = np.random.SeedSequence(int(root_seed)).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _evaluate(job: Tuple) -> ReadoutRow:
    engine, params, anneal, schedule, seed = job
    try:
        if engine is Engine.ED:
            return exact_point(params, anneal, schedule.grid, schedule.thermal, schedule.solver)
        row, _ = qmc_point(params, anneal, schedule.grid, schedule.thermal, schedule.qmc, seed)
        return row
    except InvariantViolationError:
        raise
    except (FluxStoqError, ArithmeticError, ValueError, np.linalg.LinAlgError, RuntimeError) as e:
        logger.warning(f"{engine} failed at phi_x={anneal.phi_x:.6g}: {e}")
        return ReadoutRow(phi_x=anneal.phi_x, engine=engine, i1=float("nan"), i2=float("nan"),
                          status=f"failed: {type(e).__name__}: {e}")


def sweep(schedule: AnnealSchedule, params: CircuitParams,
          workers: Optional[int] = None) -> List[ReadoutRow]:
    """Evaluate every anneal point with the selected engines.

    A failing point produces a flagged row and the sweep continues. Rows are
    ordered by phi_x (ED before QMC) whatever the completion order.
    """
    points = schedule.anneal_points()
    seeds = point_seeds(schedule.qmc.seed, len(points))
    jobs = []
    for point, seed in zip(points, seeds):
        for engine in (Engine.ED, Engine.QMC):
            if schedule.engine.includes(engine):
                jobs.append((engine, params, point, schedule, seed))

    n_workers = min(worker_limit(workers), len(jobs))
    logger.info(f"Sweeping {len(points)} points with engine {schedule.engine} on {n_workers} worker(s)")
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_evaluate, jobs))
    else:
        rows = [_evaluate(job) for job in jobs]

    rows.sort(key=lambda r: (r.phi_x, r.engine is not Engine.ED))
    failed = sum(r.failed for r in rows)
    if failed:
        logger.warning(f"{failed} of {len(rows)} sweep evaluations failed")
    return rows


def final_readout(rows: Sequence[ReadoutRow], engine: Engine) -> QubitLabel:
    """Label at the last successful point of one engine."""
    candidates = [r for r in rows if r.engine is engine and not r.failed]
    if not candidates:
        return QubitLabel.INDETERMINATE
    return max(candidates, key=lambda r: r.phi_x).label


def fit_convergence_order(deltas: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(delta).

    Raises:
        UsageError: If fewer than two positive errors are available
    """
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if d.shape != e.shape:
        raise UsageError(f"Got {d.size} spacings and {e.size} errors")
    keep = (d > 0) & (e > 0)
    if np.count_nonzero(keep) < 2:
        raise UsageError("Need at least two positive errors to fit a convergence order")
    slope, _ = np.polyfit(np.log(d[keep]), np.log(e[keep]), 1)
    return float(slope)


CurrentFunction = Callable[[float], float]


def delta_convergence_study(anneal: AnnealPoint, deltas: Sequence[float], params: CircuitParams,
                            margin: float = GridSpec().margin,
                            thermal: Optional[ThermalSpec] = None,
                            solver: EigenSolver = EigenSolver.SHIFT_INVERT,
                            current_fn: Optional[CurrentFunction] = None) -> ConvergenceStudy:
    """Relative error of I1 against the smallest-spacing result.

    Args:
        anneal: Anneal point to study
        deltas: At least three spacings spanning at least one decade
        params: Circuit parameters
        margin: Extent margin of every grid
        thermal: Thermal ensemble, 12 mK by default
        solver: Eigensolver back-end
        current_fn: Optional replacement mapping a spacing to I1

    Returns:
        ConvergenceStudy: Rows ordered by descending spacing, the fitted order
            and whether the error decreases monotonically

    Raises:
        UsageError: If the spacings do not meet the preconditions
    """
    values = sorted((float(d) for d in deltas), reverse=True)
    if len(values) < 3:
        raise UsageError(f"Need at least 3 grid spacings, got {len(values)}")
    if values[-1] <= 0 or values[0] / values[-1] < 10.0 * (1 - 1e-12):
        raise UsageError(f"Spacings must be positive and span a decade, got {values}")
    thermal = thermal or ThermalSpec()

    if current_fn is None:
        def current_fn(delta: float) -> float:
            return exact_point(params, anneal, GridSpec(delta, margin), thermal, solver).i1

    currents = [current_fn(d) for d in values]
    reference = currents[-1]
    if reference == 0:
        raise UsageError("Reference current is zero; relative errors are undefined")

    rows = tuple(ConvergenceRow(delta=d, phi_x=anneal.phi_x, i1=i,
                                rel_err=abs(i - reference) / abs(reference))
                 for d, i in zip(values, currents))

    errors = [r.rel_err for r in rows[:-1]]
    monotone = all(b <= a for a, b in zip(errors, errors[1:]))
    if not monotone:
        logger.warning(f"Relative error is not monotone in the spacing at phi_x={anneal.phi_x:.6g}; "
                       "the grid boundary may be contaminating the result")

    order = None
    try:
        order = fit_convergence_order([r.delta for r in rows[:-1]], errors)
    except UsageError:
        logger.debug("Too few non-zero errors to fit a convergence order")
    return ConvergenceStudy(rows=rows, monotone=monotone, order=order)
