"""Update moves of the permutation-matrix-representation Monte Carlo.

The moves run as compiled kernels on the configuration's preallocated
buffers. A proposal only builds the new energy multiset in a scratch buffer;
the sequence and path are rewritten when the move is accepted. Proposals that
would leave the grid are rejected; moves that cannot be proposed at all (for
example a block swap on a sequence shorter than two) are reported as skipped.

Each attempt consumes one row of ``UNIFORMS_PER_MOVE`` uniforms: entry 0
selects the move kind inside a sweep, entry 1 the axis, split point or cycle
option, entries 2 and 3 the direction, slot or label, and the last entry
decides acceptance.
"""

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from ..models.enums import MoveKind
from ..models.grid import PmrHamiltonian
from ..models.qmc import QmcConfiguration
from .divided_differences import divided_diff_log_kernel
from .errors import InvariantViolationError


class MoveOutcome(NamedTuple):
    proposed: bool
    accepted: bool


SKIPPED = MoveOutcome(False, False)
REJECTED = MoveOutcome(True, False)
ACCEPTED = MoveOutcome(True, True)

# outcome codes returned by the kernels, indexing OUTCOMES
SKIP, REJECT, ACCEPT = 0, 1, 2
OUTCOMES = (SKIPPED, REJECTED, ACCEPTED)

KIND_CODES = {kind: code for code, kind in enumerate(MoveKind)}
UNIFORMS_PER_MOVE = 5


class Lattice(NamedTuple):
    """Array form of a discretized Hamiltonian, as the kernels consume it."""

    d0: np.ndarray
    shape: np.ndarray
    strides: np.ndarray
    log_hop: np.ndarray


def lattice_of(h: PmrHamiltonian) -> Lattice:
    return Lattice(
        d0=np.ascontiguousarray(h.d0, dtype=np.float64),
        shape=np.asarray(h.grid.shape, dtype=np.int64),
        strides=np.asarray(h.grid.strides, dtype=np.int64),
        log_hop=np.log(np.abs(np.asarray(h.hop, dtype=np.float64))),
    )


def acceptance_probability(log_ratio: float) -> float:
    """Metropolis probability ``min(1, exp(log_ratio))``."""
    return 1.0 if log_ratio >= 0 else math.exp(log_ratio)


def check_weight(config: QmcConfiguration) -> None:
    """Assert the weight sign structure of a configuration.

    Raises:
        InvariantViolationError: If the weight is negative or not finite, or the
            divided difference has the wrong sign
    """
    expected = -1 if config.q % 2 else 1
    if config.dd_sign != expected or config.weight_sign < 0:
        raise InvariantViolationError(
            f"Negative configuration weight at q={config.q}",
            {'hop_sign': config.hop_sign, 'dd_sign': config.dd_sign, 'state': config.state})
    if not math.isfinite(config.log_weight):
        raise InvariantViolationError(
            f"Configuration weight is not finite at q={config.q}",
            {'log_weight': config.log_weight, 'state': config.state})


@njit(cache=True)
def _pick(u, n):
    k = int(u * n)
    return k if k < n else n - 1


@njit(cache=True)
def _accept(log_ratio, u):
    return log_ratio >= 0.0 or u < math.exp(log_ratio)


@njit(cache=True)
def shift_target(flat, axis, step, shape, strides):
    """Flat index ``step`` grid units along ``axis`` from ``flat``; -1 when off-grid."""
    coord = (flat // strides[axis]) % shape[axis] + step
    if coord < 0 or coord >= shape[axis]:
        return -1
    return flat + step * strides[axis]


@njit(cache=True)
def shift_path(path, n, axis, step, shape, strides, out):
    """Translate ``path[:n]`` into ``out``; False if any point leaves the grid."""
    for j in range(n):
        target = shift_target(path[j], axis, step, shape, strides)
        if target < 0:
            return False
        out[j] = target
    return True


@njit(cache=True)
def _open_gap(buffer, start, length, width):
    for j in range(length - 1, start - 1, -1):
        buffer[j + width] = buffer[j]


@njit(cache=True)
def _close_gap(buffer, start, length, width):
    for j in range(start, length - width):
        buffer[j] = buffer[j + width]


@njit(cache=True)
def _classical(u, steps, path, en, s_path, s_en, q, log_dd, d0, shape, strides, beta):
    axis = _pick(u[1], shape.shape[0])
    step = steps if u[2] < 0.5 else -steps
    if not shift_path(path, q + 1, axis, step, shape, strides, s_path):
        return REJECT, log_dd, 1
    for j in range(q + 1):
        s_en[j] = d0[s_path[j]]
    sign, new_dd = divided_diff_log_kernel(s_en[:q + 1], beta)
    if not _accept(new_dd - log_dd, u[4]):
        return REJECT, log_dd, 1
    path[:q + 1] = s_path[:q + 1]
    en[:q + 1] = s_en[:q + 1]
    return ACCEPT, new_dd, sign


@njit(cache=True)
def _block_swap(u, seq, path, en, s_seq, s_path, s_en, q, log_dd, beta):
    # split point uniform over the q-1 interior positions
    j = 1 + _pick(u[1], q - 1)
    m = q - j
    s_en[:m + 1] = en[j:q + 1]
    s_en[m + 1:q + 1] = en[1:j + 1]
    sign, new_dd = divided_diff_log_kernel(s_en[:q + 1], beta)
    if not _accept(new_dd - log_dd, u[4]):
        return REJECT, log_dd, 1
    s_seq[:m] = seq[j:q]
    s_seq[m:q] = seq[:j]
    s_path[:m + 1] = path[j:q + 1]
    s_path[m + 1:q + 1] = path[1:j + 1]
    seq[:q] = s_seq[:q]
    path[:q + 1] = s_path[:q + 1]
    en[:q + 1] = s_en[:q + 1]
    return ACCEPT, new_dd, sign


@njit(cache=True)
def attempt_move(kind, u, seq, path, en, s_seq, s_path, s_en, q, log_hops, log_dd, dd_sign,
                 d0, shape, strides, log_hop, beta, long_step):
    """Attempt one move of ``kind`` (index into ``MoveKind``) on the buffers.

    The buffers must have room for two more operators. Returns the outcome
    code and the new ``q``, ``log_hops``, ``log_dd`` and ``dd_sign``.
    """
    if kind == 0 or kind == 1:
        steps = 1 if kind == 0 else long_step
        code, new_dd, sign = _classical(u, steps, path, en, s_path, s_en, q, log_dd, d0, shape, strides, beta)
        if code == ACCEPT:
            return ACCEPT, q, log_hops, new_dd, sign
        return code, q, log_hops, log_dd, dd_sign

    if kind == 2:
        if q < 2:
            return SKIP, q, log_hops, log_dd, dd_sign
        code, new_dd, sign = _block_swap(u, seq, path, en, s_seq, s_path, s_en, q, log_dd, beta)
        if code == ACCEPT:
            return ACCEPT, q, log_hops, new_dd, sign
        return code, q, log_hops, log_dd, dd_sign

    n_labels = 2 * shape.shape[0]
    choice = _pick(u[1], 3)
    if choice == 0:
        # insert P_a P_-a into one of the q+1 slots
        slot = _pick(u[2], q + 1)
        index = _pick(u[3], n_labels)
        axis = index // 2
        step = 1 if index % 2 == 0 else -1
        anchor = path[slot]
        visited = shift_target(anchor, axis, step, shape, strides)
        if visited < 0:
            return REJECT, q, log_hops, log_dd, dd_sign
        s_en[:slot + 1] = en[:slot + 1]
        s_en[slot + 1] = d0[visited]
        s_en[slot + 2] = en[slot]
        s_en[slot + 3:q + 3] = en[slot + 1:q + 1]
        new_hops = log_hops + 2.0 * log_hop[axis]
        sign, new_dd = divided_diff_log_kernel(s_en[:q + 3], beta)
        log_ratio = (new_hops + new_dd) - (log_hops + log_dd) + math.log(n_labels)
        if not _accept(log_ratio, u[4]):
            return REJECT, q, log_hops, log_dd, dd_sign
        label = step * (axis + 1)
        _open_gap(seq, slot, q, 2)
        seq[slot] = label
        seq[slot + 1] = -label
        _open_gap(path, slot + 1, q + 1, 2)
        path[slot + 1] = visited
        path[slot + 2] = anchor
        en[:q + 3] = s_en[:q + 3]
        return ACCEPT, q + 2, new_hops, new_dd, sign

    if q < 2:
        return SKIP, q, log_hops, log_dd, dd_sign
    pos = _pick(u[2], q - 1)
    first = seq[pos]
    second = seq[pos + 1]

    if choice == 1:
        # remove an adjacent inverse pair
        if second != -first:
            return REJECT, q, log_hops, log_dd, dd_sign
        s_en[:pos + 1] = en[:pos + 1]
        s_en[pos + 1:q - 1] = en[pos + 3:q + 1]
        new_hops = log_hops - 2.0 * log_hop[abs(first) - 1]
        sign, new_dd = divided_diff_log_kernel(s_en[:q - 1], beta)
        log_ratio = (new_hops + new_dd) - (log_hops + log_dd) - math.log(n_labels)
        if not _accept(log_ratio, u[4]):
            return REJECT, q, log_hops, log_dd, dd_sign
        _close_gap(seq, pos, q, 2)
        _close_gap(path, pos + 1, q + 1, 2)
        en[:q - 1] = s_en[:q - 1]
        return ACCEPT, q - 2, new_hops, new_dd, sign

    # exchange two neighbours; equal labels leave nothing to exchange
    if first == second:
        return SKIP, q, log_hops, log_dd, dd_sign
    step = 1 if second > 0 else -1
    visited = shift_target(path[pos], abs(second) - 1, step, shape, strides)
    if visited < 0:
        return REJECT, q, log_hops, log_dd, dd_sign
    s_en[:q + 1] = en[:q + 1]
    s_en[pos + 1] = d0[visited]
    sign, new_dd = divided_diff_log_kernel(s_en[:q + 1], beta)
    if not _accept(new_dd - log_dd, u[4]):
        return REJECT, q, log_hops, log_dd, dd_sign
    seq[pos] = second
    seq[pos + 1] = first
    path[pos + 1] = visited
    en[pos + 1] = d0[visited]
    return ACCEPT, q, log_hops, new_dd, sign


@njit(cache=True)
def sweep_block(uniforms, cumulative, per_sweep, seq, path, en, s_seq, s_path, s_en,
                q, log_hops, log_dd, dd_sign, d0, shape, strides, log_hop, beta, long_step,
                counts, states_out, q_out):
    """Run ``len(states_out)`` sweeps of ``per_sweep`` moves each.

    The move kind is the first index with ``cumulative[k] > u[0]``. Outcome
    codes are tallied into ``counts[kind, code]``; the basis state and
    sequence length after every sweep go to ``states_out`` and ``q_out``.
    """
    n_kinds = cumulative.shape[0]
    row = 0
    for sweep in range(states_out.shape[0]):
        for _ in range(per_sweep):
            u = uniforms[row]
            row += 1
            kind = n_kinds - 1
            for k in range(n_kinds):
                if u[0] < cumulative[k]:
                    kind = k
                    break
            code, q, log_hops, log_dd, dd_sign = attempt_move(
                kind, u, seq, path, en, s_seq, s_path, s_en, q, log_hops, log_dd, dd_sign,
                d0, shape, strides, log_hop, beta, long_step)
            counts[kind, code] += 1
        states_out[sweep] = path[0]
        q_out[sweep] = q
    return q, log_hops, log_dd, dd_sign


def apply_move(kind: MoveKind, config: QmcConfiguration, lattice: Lattice, beta: float,
               uniforms: np.ndarray, long_step: int = 2) -> MoveOutcome:
    """Attempt one move on ``config`` with an explicit row of uniforms."""
    config.reserve(2)
    s_seq, s_path, s_en = config.scratch()
    code, q, log_hops, log_dd, dd_sign = attempt_move(
        KIND_CODES[kind], np.asarray(uniforms, dtype=np.float64),
        config.sequence_buffer, config.path_buffer, config.energy_buffer, s_seq, s_path, s_en,
        int(config.q), float(config.log_hops), float(config.log_dd), int(config.dd_sign),
        lattice.d0, lattice.shape, lattice.strides, lattice.log_hop, float(beta), int(long_step))
    config.q, config.log_hops, config.log_dd, config.dd_sign = int(q), float(log_hops), float(log_dd), int(dd_sign)
    if code == ACCEPT:
        check_weight(config)
    return OUTCOMES[code]


def classical_move_short(config: QmcConfiguration, h: PmrHamiltonian, beta: float,
                         rng: np.random.Generator) -> MoveOutcome:
    """Shift the basis state by one grid unit along a random axis and direction."""
    return apply_move(MoveKind.SHORT, config, lattice_of(h), beta, rng.random(UNIFORMS_PER_MOVE))


def classical_move_long(config: QmcConfiguration, h: PmrHamiltonian, beta: float,
                        rng: np.random.Generator, long_step: int) -> MoveOutcome:
    return apply_move(MoveKind.LONG, config, lattice_of(h), beta, rng.random(UNIFORMS_PER_MOVE),
                      long_step)


def block_swap(config: QmcConfiguration, h: PmrHamiltonian, beta: float,
               rng: np.random.Generator) -> MoveOutcome:
    """Split the sequence as S1 S2, move the state to <I|S1 and use S2 S1.

    The split point is uniform over the q-1 interior positions, so the
    proposal is symmetric.
    """
    return apply_move(MoveKind.BLOCK_SWAP, config, lattice_of(h), beta, rng.random(UNIFORMS_PER_MOVE))


def cycle_completion(config: QmcConfiguration, h: PmrHamiltonian, beta: float,
                     rng: np.random.Generator) -> MoveOutcome:
    """Replace a subsequence of length at most two by an equivalent one.

    With probability 1/3 each: insert an inverse pair ``P_a P_-a`` into one of
    the q+1 slots (label uniform over the 2n labels), remove an adjacent
    inverse pair at one of the q-1 positions, or exchange two adjacent
    operators. Insertion and removal carry the Hastings factors ``2n`` and
    ``1/(2n)``. Exchanging two equal operators is skipped.
    """
    return apply_move(MoveKind.CYCLE, config, lattice_of(h), beta, rng.random(UNIFORMS_PER_MOVE))
