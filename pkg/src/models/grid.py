"""Grid geometry and the permutation-matrix form of a discretized Hamiltonian."""

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from ..engine.errors import ParameterValidationError
from .enums import BoundaryPolicy


MAX_STATES = np.iinfo(np.int64).max // 4


@dataclass(frozen=True)
class Grid:
    """Equally spaced grid of points ``origin + (i - (N-1)/2) * delta`` per axis."""

    n_dims: int
    delta: float
    points_per_dim: Tuple[int, ...]
    origin_offset: Tuple[float, ...]

    def __post_init__(self):
        if self.delta <= 0 or not np.isfinite(self.delta):
            raise ParameterValidationError(f"Grid spacing must be positive, got {self.delta}", self.delta)
        if self.n_dims < 1:
            raise ParameterValidationError(f"Grid needs at least one axis, got {self.n_dims}")
        if len(self.points_per_dim) != self.n_dims or len(self.origin_offset) != self.n_dims:
            raise ParameterValidationError(
                f"Expected {self.n_dims} point counts and offsets, got "
                f"{len(self.points_per_dim)} and {len(self.origin_offset)}")
        if any(int(n) < 1 for n in self.points_per_dim):
            raise ParameterValidationError(f"Point counts must be positive, got {self.points_per_dim}")
        size = 1
        for n in self.points_per_dim:
            size *= int(n)
        if size > MAX_STATES:
            raise ParameterValidationError(f"Grid with {size} states exceeds the index space", size)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(int(n) for n in self.points_per_dim)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def strides(self) -> Tuple[int, ...]:
        """Flat-index stride of a unit step along each axis (C order)."""
        strides = []
        step = 1
        for n in reversed(self.shape):
            strides.append(step)
            step *= n
        return tuple(reversed(strides))

    def axis_points(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return self.origin_offset[axis] + (np.arange(n) - (n - 1) / 2.0) * self.delta

    def coordinates(self) -> np.ndarray:
        """Point coordinates with shape ``(n_dims, *shape)``."""
        axes = [self.axis_points(k) for k in range(self.n_dims)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def coords_of(self, flat_index) -> np.ndarray:
        """Per-axis integer indices of flat indices, shape ``(n_dims, ...)``."""
        return np.array(np.unravel_index(flat_index, self.shape))

    def flat_of(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in coords), self.shape))

    def to_dict(self) -> Dict[str, object]:
        return {
            'n_dims': self.n_dims,
            'delta': self.delta,
            'points_per_dim': list(self.shape),
            'origin_offset': [float(o) for o in self.origin_offset],
        }


@dataclass(frozen=True)
class GridIndex:
    """Per-axis integer coordinates of one grid point."""

    coords: Tuple[int, ...]
    grid: Grid = field(repr=False, compare=False)

    def __post_init__(self):
        if len(self.coords) != self.grid.n_dims:
            raise ParameterValidationError(
                f"Index {self.coords} does not match a {self.grid.n_dims}-dimensional grid")
        for c, n in zip(self.coords, self.grid.shape):
            if not 0 <= c < n:
                raise ParameterValidationError(f"Index {self.coords} outside grid {self.grid.shape}", self.coords)

    @property
    def flat(self) -> int:
        return self.grid.flat_of(self.coords)

    @classmethod
    def from_flat(cls, flat_index: int, grid: Grid) -> 'GridIndex':
        return cls(tuple(int(c) for c in np.unravel_index(int(flat_index), grid.shape)), grid)

    def position(self) -> np.ndarray:
        """Coordinate value of the point along each axis."""
        return np.array([self.grid.axis_points(k)[c] for k, c in enumerate(self.coords)])


@dataclass(frozen=True)
class PmrHamiltonian:
    """Discretized Hamiltonian ``H = D0 + sum_k hop_k (P_{+k} + P_{-k})``.

    ``d0`` already contains the kinetic diagonal ``sum_k 2 mu_k / delta**2``.
    Operator labels are ``+(k+1)`` for a unit shift up along axis ``k`` and
    ``-(k+1)`` for the inverse shift.
    """

    d0: np.ndarray
    hop: Tuple[float, ...]
    grid: Grid
    mu: Tuple[float, ...]
    boundary: BoundaryPolicy = BoundaryPolicy.DIRICHLET

    def __post_init__(self):
        if self.d0.shape != (self.grid.size,):
            raise ParameterValidationError(
                f"Diagonal has shape {self.d0.shape}, expected ({self.grid.size},)")
        if len(self.hop) != self.grid.n_dims:
            raise ParameterValidationError(f"Expected {self.grid.n_dims} hopping strengths, got {len(self.hop)}")
        self.d0.setflags(write=False)

    @property
    def n_dims(self) -> int:
        return self.grid.n_dims

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def kinetic_shift(self) -> float:
        """The additive diagonal shift ``sum_k 2 mu_k / delta**2``."""
        return float(sum(2.0 * m for m in self.mu) / self.grid.delta ** 2)

    @property
    def potential_values(self) -> np.ndarray:
        return self.d0 - self.kinetic_shift

    @property
    def labels(self) -> Tuple[int, ...]:
        """All operator labels ``+-1 .. +-n``."""
        return tuple(s * (k + 1) for k in range(self.n_dims) for s in (1, -1))

    def hop_for(self, label: int) -> float:
        return self.hop[abs(label) - 1]

    def shift(self, flat_index: int, label: int, steps: int = 1) -> int:
        """Apply ``P_label`` ``steps`` times; returns -1 when the result is off-grid."""
        axis = abs(label) - 1
        direction = steps if label > 0 else -steps
        coord = (flat_index // self.grid.strides[axis]) % self.grid.shape[axis]
        target = coord + direction
        if not 0 <= target < self.grid.shape[axis]:
            return -1
        return flat_index + direction * self.grid.strides[axis]


@dataclass(frozen=True)
class StoquasticityReport:
    """Summary of the off-diagonal sign structure of a Hamiltonian matrix."""

    max_off_diagonal: float
    positive_off_diagonals: int
    off_diagonal_count: int
    diagonal_shift: float

    @property
    def stoquastic(self) -> bool:
        return self.positive_off_diagonals == 0

    def summary_line(self) -> str:
        return (f"stoquastic: {str(self.stoquastic).lower()}, "
                f"positive off-diagonals: {self.positive_off_diagonals}")

    def to_dict(self) -> Dict[str, object]:
        return {
            'stoquastic': self.stoquastic,
            'max_off_diagonal': self.max_off_diagonal,
            'positive_off_diagonals': self.positive_off_diagonals,
            'off_diagonal_count': self.off_diagonal_count,
            'diagonal_shift': self.diagonal_shift,
        }
