"""Permutation-matrix-representation quantum Monte Carlo.

A configuration is a basis state plus an operator sequence composing to the
identity. Its weight is the product of hopping strengths along the sequence
times the divided difference of ``exp(-beta x)`` over the visited diagonal
energies. Because every hopping strength is negative and sequences have
even length, weights are never negative; a negative weight aborts the run.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..models.enums import MoveKind
from ..models.grid import PmrHamiltonian
from ..models.qmc import MoveCounter, MoveParams, QmcConfiguration, RunStats
from .divided_differences import ScaledFloat, divided_diff_exp_log
from .errors import InvariantViolationError, UsageError
from .moves import ACCEPT, REJECT, SKIP, UNIFORMS_PER_MOVE, check_weight, lattice_of, sweep_block
from .statistics import DEFAULT_BINS, MIN_BINS, estimate


logger = logging.getLogger(__name__)

DEFAULT_BURN_IN = 0.2
AUDIT_INTERVAL = 10_000
AUDIT_TOLERANCE = 1e-8
BLOCK_SWEEPS = 1000
THREADS_ENV = "FLUXSTOQ_THREADS"


def make_rng(seed_sequence: np.random.SeedSequence) -> np.random.Generator:
    """Counter-based generator for one chain."""
    return np.random.Generator(np.random.Philox(seed_sequence))


def initial_configuration(h: PmrHamiltonian, beta: float, rng: np.random.Generator,
                          start: str = "minimum") -> QmcConfiguration:
    """Empty-sequence configuration at the lowest diagonal energy or a random state."""
    if start == "minimum":
        state = int(np.argmin(h.d0))
    elif start == "random":
        state = int(rng.integers(h.size))
    else:
        raise UsageError(f"Unknown start policy '{start}', expected 'minimum' or 'random'")

    energy = float(h.d0[state])
    return QmcConfiguration.from_arrays(
        np.empty(0, dtype=np.int64),
        np.array([state], dtype=np.int64),
        np.array([energy]),
        log_hops=0.0,
        hop_sign=1,
        log_dd=-beta * energy,
        dd_sign=1,
    )


def configuration_from_sequence(h: PmrHamiltonian, beta: float, state: int,
                                sequence: Sequence[int]) -> QmcConfiguration:
    """Build a configuration, with cached weight parts, from a state and labels."""
    seq = np.asarray(sequence, dtype=np.int64)
    path = QmcConfiguration.walk(h, int(state), seq)
    energies = np.asarray(h.d0[path], dtype=float)
    hops = np.array([h.hop_for(int(s)) for s in seq])
    sign, log_dd = divided_diff_exp_log(energies, beta)
    return QmcConfiguration.from_arrays(
        seq,
        path,
        energies,
        log_hops=float(np.sum(np.log(np.abs(hops)))) if seq.size else 0.0,
        hop_sign=int(np.prod(np.sign(hops))) if seq.size else 1,
        log_dd=log_dd,
        dd_sign=sign,
    )


def weight(config: QmcConfiguration, h: PmrHamiltonian, beta: float) -> ScaledFloat:
    """Recompute the weight of a configuration from scratch.

    Raises:
        InvariantViolationError: If the sequence is invalid or the weight negative
    """
    fresh = configuration_from_sequence(h, beta, config.state, config.sequence)
    check_weight(fresh)
    return ScaledFloat.from_log(fresh.weight_sign, fresh.log_weight)


def audit(config: QmcConfiguration, h: PmrHamiltonian, beta: float,
          tolerance: float = AUDIT_TOLERANCE) -> None:
    """Replay the sequence and compare with the cached energies and weight.

    Raises:
        InvariantViolationError: On any disagreement beyond ``tolerance``
    """
    path, energies = config.replay(h)
    if not np.array_equal(path, config.path):
        raise InvariantViolationError("Cached path differs from replay", {'q': config.q})
    if not np.allclose(energies, config.energies, rtol=tolerance, atol=0.0):
        raise InvariantViolationError("Cached energies differ from replay", {'q': config.q})
    fresh = configuration_from_sequence(h, beta, config.state, config.sequence)
    drift = abs(fresh.log_weight - config.log_weight)
    if drift > tolerance or fresh.weight_sign != config.weight_sign:
        raise InvariantViolationError(
            f"Cached weight drifted by {drift:.3g} (log scale)", {'q': config.q})


def measure_diagonal(config: QmcConfiguration, observable) -> float:
    """Sample a diagonal observable at the configuration's basis state.

    ``observable`` is either an array over grid points or a callable taking
    the flat state index.
    """
    if callable(observable):
        return float(observable(config.state))
    return float(np.asarray(observable)[config.state])


def _moves_per_sweep(h: PmrHamiltonian) -> int:
    # one move per grid axis plus one sequence move
    return h.n_dims + 1


def _next_block(sweep: int, n_sweeps: int, audit_interval: int) -> int:
    block = min(BLOCK_SWEEPS, n_sweeps - sweep)
    if audit_interval:
        block = min(block, audit_interval - sweep % audit_interval)
    return block


def run(h: PmrHamiltonian, beta: float, params: MoveParams, n_sweeps: int,
        observables: Mapping[str, np.ndarray], burn_in: float = DEFAULT_BURN_IN,
        n_bins: int = DEFAULT_BINS, start: str = "minimum",
        seed_sequence: Optional[np.random.SeedSequence] = None,
        keep_samples: bool = False, audit_interval: int = AUDIT_INTERVAL) -> RunStats:
    """Run one Markov chain.

    Args:
        h: Discretized Hamiltonian
        beta: Inverse temperature in internal units
        params: Long step, move mix and seed
        n_sweeps: Total sweeps including burn-in
        observables: Diagonal observables over grid points, by name
        burn_in: Fraction of sweeps discarded before measuring
        n_bins: Number of bins for error bars (at least 16)
        start: Initial state policy, ``minimum`` or ``random``
        seed_sequence: Stream of this chain; derived from ``params.rng_seed`` if None
        keep_samples: Keep the raw ``(sweep, q, observables...)`` rows
        audit_interval: Sweeps between full replay audits

    Returns:
        RunStats: Binned estimates and move statistics

    Raises:
        UsageError: If the sweep budget cannot fill the bins
        InvariantViolationError: If a weight turns negative or a cached weight drifts
    """
    if not beta > 0:
        raise UsageError(f"beta must be positive, got {beta}")
    if not 0 <= burn_in < 1:
        raise UsageError(f"Burn-in fraction must lie in [0, 1), got {burn_in}")
    if n_bins < MIN_BINS:
        raise UsageError(f"Need at least {MIN_BINS} bins, got {n_bins}")
    n_burn = int(math.floor(burn_in * n_sweeps))
    n_measure = n_sweeps - n_burn
    if n_measure < n_bins:
        raise UsageError(f"{n_sweeps} sweeps leave {n_measure} measurements for {n_bins} bins")
    for name, values in observables.items():
        if np.asarray(values).shape != (h.size,):
            raise UsageError(f"Observable '{name}' must have one value per grid point")

    if seed_sequence is None:
        seed_sequence = np.random.SeedSequence(int(params.rng_seed))
    rng = make_rng(seed_sequence)
    stream_id = int(seed_sequence.generate_state(1, dtype=np.uint64)[0])

    kinds = list(MoveKind)
    cumulative = np.cumsum(np.asarray(params.move_mix, dtype=float))
    cumulative[-1] = 1.0
    counts = np.zeros((len(kinds), 3), dtype=np.int64)
    per_sweep = _moves_per_sweep(h)
    lattice = lattice_of(h)
    long_step = int(params.long_step)

    names = list(observables)
    tables = np.asarray([observables[name] for name in names], dtype=float).reshape(len(names), h.size)
    states = np.empty(n_sweeps, dtype=np.int64)
    q_trace = np.empty(n_sweeps, dtype=np.int64)

    config = initial_configuration(h, beta, rng, start)
    logger.info(f"Starting chain: {n_sweeps} sweeps ({n_burn} burn-in), "
                f"{per_sweep} moves per sweep, {h.size} states")

    sweep = 0
    while sweep < n_sweeps:
        block = _next_block(sweep, n_sweeps, audit_interval)
        uniforms = rng.random((block * per_sweep, UNIFORMS_PER_MOVE))
        # every move grows the sequence by at most two operators
        config.reserve(2 * block * per_sweep)
        s_seq, s_path, s_en = config.scratch()
        q, log_hops, log_dd, dd_sign = sweep_block(
            uniforms, cumulative, per_sweep,
            config.sequence_buffer, config.path_buffer, config.energy_buffer, s_seq, s_path, s_en,
            int(config.q), float(config.log_hops), float(config.log_dd), int(config.dd_sign),
            lattice.d0, lattice.shape, lattice.strides, lattice.log_hop, float(beta), long_step,
            counts, states[sweep:sweep + block], q_trace[sweep:sweep + block])
        config.q, config.log_hops, config.log_dd, config.dd_sign = int(q), float(log_hops), float(log_dd), int(dd_sign)
        sweep += block

        check_weight(config)
        if audit_interval and sweep % audit_interval == 0:
            audit(config, h, beta)
            logger.debug(f"Audit passed at sweep {sweep} (q={config.q})")

    counters = {
        kind: MoveCounter(proposed=int(counts[k, REJECT] + counts[k, ACCEPT]),
                          accepted=int(counts[k, ACCEPT]), skipped=int(counts[k, SKIP]))
        for k, kind in enumerate(kinds)
    }
    series = tables[:, states[n_burn:]].T
    q_series = q_trace[n_burn:].astype(float)

    estimates = {name: estimate(series[:, i], n_bins, name) for i, name in enumerate(names)}
    samples = None
    if keep_samples:
        sweeps = np.arange(n_burn, n_sweeps, dtype=float)
        samples = np.column_stack([sweeps, q_series, series])

    stats = RunStats(
        estimates=estimates,
        moves=counters,
        n_sweeps=n_sweeps,
        n_measured=n_measure,
        mean_q=float(q_series.mean()),
        seeds=[stream_id],
        move_params=params,
        moves_per_sweep=per_sweep,
        chains=1,
        samples=samples,
    )
    rates = ", ".join(f"{kind.display_name} {counter.acceptance_rate:.3f}" for kind, counter in counters.items())
    logger.info(f"Chain finished: mean q {stats.mean_q:.3g}; acceptance {rates}")
    return stats


def merge_run_stats(results: Sequence[RunStats]) -> RunStats:
    """Combine independent chains, weighting each by its measurement count."""
    if not results:
        raise UsageError("Nothing to merge")
    if len(results) == 1:
        return results[0]

    total = sum(r.n_measured for r in results)
    weights = [r.n_measured / total for r in results]
    names = list(results[0].estimates)

    estimates = {}
    for name in names:
        parts = [r.estimates[name] for r in results]
        mean = sum(w * p.mean for w, p in zip(weights, parts))
        error = math.sqrt(sum((w * p.error) ** 2 for w, p in zip(weights, parts)))
        tau = sum(w * p.tau for w, p in zip(weights, parts))
        estimates[name] = type(parts[0])(
            mean=mean, error=error, tau=tau,
            n_bins=sum(p.n_bins for p in parts),
            equilibrated=all(p.equilibrated for p in parts))

    moves = {}
    for kind in results[0].moves:
        counter = MoveCounter()
        for r in results:
            counter = counter.merge(r.moves[kind])
        moves[kind] = counter

    samples = None
    if all(r.samples is not None for r in results):
        samples = np.vstack([r.samples for r in results])

    return RunStats(
        estimates=estimates,
        moves=moves,
        n_sweeps=sum(r.n_sweeps for r in results),
        n_measured=total,
        mean_q=sum(w * r.mean_q for w, r in zip(weights, results)),
        seeds=[s for r in results for s in r.seeds],
        move_params=results[0].move_params,
        moves_per_sweep=results[0].moves_per_sweep,
        chains=sum(r.chains for r in results),
        samples=samples,
    )


def worker_limit(requested: Optional[int] = None) -> int:
    """Worker count, capped by the FLUXSTOQ_THREADS environment variable."""
    cap = os.environ.get(THREADS_ENV)
    limit = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            limit = min(limit, int(cap))
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={cap!r}")
    return max(1, limit)


def _run_chain(args: Tuple) -> RunStats:
    h, beta, params, n_sweeps, observables, kwargs, seed_sequence = args
    return run(h, beta, params, n_sweeps, observables, seed_sequence=seed_sequence, **kwargs)


def run_chains(h: PmrHamiltonian, beta: float, params: MoveParams, n_sweeps: int,
               observables: Mapping[str, np.ndarray], n_chains: int = 1,
               workers: Optional[int] = None, **kwargs) -> Tuple[RunStats, List[RunStats]]:
    """Run independent chains on spawned streams and merge them.

    Results are ordered by chain index whatever the completion order.
    """
    if n_chains < 1:
        raise UsageError(f"Need at least one chain, got {n_chains}")

    streams = np.random.SeedSequence(int(params.rng_seed)).spawn(n_chains)
    jobs = [(h, beta, params, n_sweeps, dict(observables), kwargs, s) for s in streams]
    n_workers = min(worker_limit(workers), n_chains)

    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_chain, jobs))
    else:
        results = [_run_chain(job) for job in jobs]

    return merge_run_stats(results), results
