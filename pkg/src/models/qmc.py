"""Monte Carlo configuration, move parameters and run statistics."""

from dataclasses import dataclass, field
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..engine.errors import InvariantViolationError, ParameterValidationError
from .enums import MoveKind
from .grid import PmrHamiltonian


DEFAULT_MOVE_MIX = (0.4, 0.2, 0.2, 0.2)
MIN_CAPACITY = 64


@dataclass
class QmcConfiguration:
    """A basis state and a sequence of shift operators that composes to identity.

    The operator labels, the flat indices ``z_0 .. z_q`` visited while applying
    them (``z_q == z_0``) and the diagonal energies along that path live in
    preallocated buffers; only the first ``q`` (labels) or ``q + 1`` (path,
    energies) entries are in use. The weight is kept as
    ``hop_sign * dd_sign * exp(log_hops + log_dd)``.
    """

    q: int
    sequence_buffer: np.ndarray
    path_buffer: np.ndarray
    energy_buffer: np.ndarray
    log_hops: float = 0.0
    hop_sign: int = 1
    log_dd: float = 0.0
    dd_sign: int = 1

    @classmethod
    def from_arrays(cls, sequence: np.ndarray, path: np.ndarray, energies: np.ndarray,
                    **weight_parts) -> 'QmcConfiguration':
        q = len(sequence)
        if len(path) != q + 1 or len(energies) != q + 1:
            raise InvariantViolationError(
                f"A sequence of {q} operators needs {q + 1} path points, got {len(path)} and {len(energies)}")
        capacity = max(MIN_CAPACITY, 2 * q)
        sequence_buffer = np.zeros(capacity, dtype=np.int64)
        path_buffer = np.zeros(capacity + 1, dtype=np.int64)
        energy_buffer = np.zeros(capacity + 1, dtype=np.float64)
        sequence_buffer[:q] = sequence
        path_buffer[:q + 1] = path
        energy_buffer[:q + 1] = energies
        return cls(q, sequence_buffer, path_buffer, energy_buffer, **weight_parts)

    @property
    def state(self) -> int:
        return int(self.path_buffer[0])

    @property
    def sequence(self) -> np.ndarray:
        return self.sequence_buffer[:self.q]

    @property
    def path(self) -> np.ndarray:
        return self.path_buffer[:self.q + 1]

    @property
    def energies(self) -> np.ndarray:
        return self.energy_buffer[:self.q + 1]

    @property
    def capacity(self) -> int:
        return int(self.sequence_buffer.shape[0])

    @property
    def weight_sign(self) -> int:
        return self.hop_sign * self.dd_sign

    @property
    def log_weight(self) -> float:
        return self.log_hops + self.log_dd

    def reserve(self, extra: int) -> None:
        """Grow the buffers so that ``extra`` more operators fit."""
        needed = self.q + int(extra)
        if needed <= self.capacity:
            return
        capacity = max(needed, 2 * self.capacity)
        sequence_buffer = np.zeros(capacity, dtype=np.int64)
        path_buffer = np.zeros(capacity + 1, dtype=np.int64)
        energy_buffer = np.zeros(capacity + 1, dtype=np.float64)
        sequence_buffer[:self.q] = self.sequence
        path_buffer[:self.q + 1] = self.path
        energy_buffer[:self.q + 1] = self.energies
        self.sequence_buffer, self.path_buffer, self.energy_buffer = sequence_buffer, path_buffer, energy_buffer

    def scratch(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Work buffers of the same capacity, for building proposals."""
        return (np.empty_like(self.sequence_buffer), np.empty_like(self.path_buffer),
                np.empty_like(self.energy_buffer))

    @staticmethod
    def walk(h: PmrHamiltonian, state: int, sequence: np.ndarray) -> np.ndarray:
        """Visit the states produced by applying ``sequence`` to ``state``.

        Raises:
            InvariantViolationError: If the walk leaves the grid or does not close
        """
        path = np.empty(len(sequence) + 1, dtype=np.int64)
        path[0] = state
        current = state
        for j, label in enumerate(sequence):
            current = h.shift(current, int(label))
            if current < 0:
                raise InvariantViolationError(
                    f"Operator {int(label)} at position {j} leaves the grid",
                    {'state': state, 'position': j})
            path[j + 1] = current
        if path[-1] != state:
            raise InvariantViolationError(
                "Operator sequence does not compose to the identity",
                {'state': state, 'end': int(path[-1])})
        return path

    def replay(self, h: PmrHamiltonian) -> Tuple[np.ndarray, np.ndarray]:
        """Rebuild the path and energy multiset from ``state`` and ``sequence``."""
        path = self.walk(h, self.state, self.sequence)
        return path, h.d0[path]


@dataclass(frozen=True)
class MoveParams:
    """Long-step size, move probabilities and seed of a chain.

    ``move_mix`` is ordered as short, long, block swap, cycle completion.
    """

    long_step: int = 2
    move_mix: Tuple[float, float, float, float] = DEFAULT_MOVE_MIX
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.long_step) < 2:
            raise ParameterValidationError(f"Long step must be at least 2, got {self.long_step}",
                                           self.long_step)
        if len(self.move_mix) != len(MoveKind):
            raise ParameterValidationError(
                f"Move mix needs {len(MoveKind)} entries, got {len(self.move_mix)}")
        if any(p < 0 for p in self.move_mix):
            raise ParameterValidationError(f"Move probabilities must be non-negative, got {self.move_mix}")
        if not math.isclose(sum(self.move_mix), 1.0, abs_tol=1e-9):
            raise ParameterValidationError(f"Move probabilities must sum to 1, got {sum(self.move_mix)}")
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise ParameterValidationError(f"Seed must fit in 64 bits, got {self.rng_seed}", self.rng_seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'long_step': int(self.long_step),
            'move_mix': {kind.key: p for kind, p in zip(MoveKind, self.move_mix)},
            'rng_seed': int(self.rng_seed),
        }


@dataclass
class MoveCounter:
    """Proposal bookkeeping of one move kind."""

    proposed: int = 0
    accepted: int = 0
    skipped: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def merge(self, other: 'MoveCounter') -> 'MoveCounter':
        return MoveCounter(self.proposed + other.proposed, self.accepted + other.accepted,
                           self.skipped + other.skipped)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'proposed': self.proposed,
            'accepted': self.accepted,
            'skipped': self.skipped,
            'acceptance_rate': self.acceptance_rate,
        }


@dataclass(frozen=True)
class ObservableEstimate:
    """Binned estimate of one diagonal observable."""

    mean: float
    error: float
    tau: float
    n_bins: int
    equilibrated: bool = True

    def __post_init__(self):
        if self.n_bins < 16:
            raise ParameterValidationError(f"Error bars need at least 16 bins, got {self.n_bins}",
                                           self.n_bins)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mean': self.mean,
            'error': self.error,
            'tau': self.tau,
            'n_bins': self.n_bins,
            'equilibrated': self.equilibrated,
        }


@dataclass
class RunStats:
    """Result of one or more Monte Carlo chains."""

    estimates: Dict[str, ObservableEstimate]
    moves: Dict[MoveKind, MoveCounter]
    n_sweeps: int
    n_measured: int
    mean_q: float
    seeds: List[int] = field(default_factory=list)
    move_params: Optional[MoveParams] = None
    moves_per_sweep: int = 0
    chains: int = 1
    samples: Optional[np.ndarray] = None

    @property
    def equilibrated(self) -> bool:
        return all(e.equilibrated for e in self.estimates.values())

    def acceptance_rates(self) -> Dict[str, float]:
        return {kind.key: counter.acceptance_rate for kind, counter in self.moves.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'estimates': {name: e.to_dict() for name, e in self.estimates.items()},
            'moves': {kind.key: c.to_dict() for kind, c in self.moves.items()},
            'n_sweeps': self.n_sweeps,
            'n_measured': self.n_measured,
            'mean_q': self.mean_q,
            'seeds': [int(s) for s in self.seeds],
            'move_params': self.move_params.to_dict() if self.move_params else None,
            'moves_per_sweep': self.moves_per_sweep,
            'chains': self.chains,
            'equilibrated': self.equilibrated,
        }
