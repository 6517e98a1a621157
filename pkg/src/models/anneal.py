"""Anneal schedule and result-row models."""

from dataclasses import dataclass, field
import math
from typing import Any, Dict, List, Optional, Tuple

from ..engine.errors import ParameterValidationError
from .circuit import AnnealPoint
from .enums import Engine, EigenSolver, QubitLabel
from .qmc import DEFAULT_MOVE_MIX
from .thermal import ThermalSpec


@dataclass(frozen=True)
class GridSpec:
    """Spacing and extent margin used to build the grid at every anneal point."""

    delta: float = 0.5
    margin: float = 2000.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ParameterValidationError(f"Grid spacing must be positive, got {self.delta}", self.delta)
        if not self.margin > 1:
            raise ParameterValidationError(f"Margin must exceed 1, got {self.margin}", self.margin)


@dataclass(frozen=True)
class QmcBudget:
    """Monte Carlo budget per anneal point."""

    n_sweeps: int = 20_000
    n_chains: int = 1
    seed: int = 0
    move_mix: Tuple[float, float, float, float] = DEFAULT_MOVE_MIX
    burn_in: float = 0.2
    n_bins: int = 32

    def __post_init__(self):
        if self.n_sweeps < 1 or self.n_chains < 1:
            raise ParameterValidationError(
                f"Sweeps and chains must be positive, got {self.n_sweeps} and {self.n_chains}")


@dataclass(frozen=True)
class AnnealSchedule:
    """Transverse-flux points of an anneal and the problem biases.

    Biases are given in milli flux quanta.
    """

    phi_x_points: Tuple[float, ...]
    biases_mphi0: Tuple[float, float] = (0.0, 0.0)
    engine: Engine = Engine.ED
    grid: GridSpec = field(default_factory=GridSpec)
    qmc: QmcBudget = field(default_factory=QmcBudget)
    thermal: ThermalSpec = field(default_factory=ThermalSpec)
    solver: EigenSolver = EigenSolver.SHIFT_INVERT

    def __post_init__(self):
        points = tuple(float(p) for p in self.phi_x_points)
        if len(points) < 2:
            raise ParameterValidationError(f"An anneal needs at least 2 points, got {len(points)}")
        if any(b <= a for a, b in zip(points, points[1:])):
            raise ParameterValidationError(f"Anneal points must be strictly ascending, got {points}")
        if points[0] < 0 or points[-1] > math.pi * (1 + 1e-12):
            raise ParameterValidationError(f"Anneal points must lie in [0, pi], got {points}")
        object.__setattr__(self, 'phi_x_points', points)

    def anneal_points(self) -> List[AnnealPoint]:
        b1, b2 = self.biases_mphi0
        return [AnnealPoint.from_mphi0(min(p, math.pi), b1, b2) for p in self.phi_x_points]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'phi_x_points': list(self.phi_x_points),
            'biases_mphi0': list(self.biases_mphi0),
            'engine': str(self.engine),
            'delta': self.grid.delta,
            'margin': self.grid.margin,
            'qmc': {
                'n_sweeps': self.qmc.n_sweeps,
                'n_chains': self.qmc.n_chains,
                'seed': self.qmc.seed,
                'move_mix': list(self.qmc.move_mix),
                'burn_in': self.qmc.burn_in,
                'n_bins': self.qmc.n_bins,
            },
            'thermal': self.thermal.to_dict(),
            'solver': str(self.solver),
        }


@dataclass(frozen=True)
class ReadoutRow:
    """Persistent currents (nA) and readout at one anneal point for one engine."""

    phi_x: float
    engine: Engine
    i1: float
    i2: float
    i1_error: float = 0.0
    i2_error: float = 0.0
    label: QubitLabel = QubitLabel.INDETERMINATE
    e0: Optional[float] = None
    e1: Optional[float] = None
    trunc_bound: Optional[float] = None
    status: str = "ok"

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    @property
    def gap(self) -> Optional[float]:
        if self.e0 is None or self.e1 is None:
            return None
        return self.e1 - self.e0

    CSV_FIELDS = ("phi_x", "engine", "I1_nA", "I1_err_nA", "I2_nA", "I2_err_nA", "label",
                  "E0_GHz", "E1_GHz", "gap_GHz", "trunc_bound", "status")

    def to_csv_row(self) -> Dict[str, Any]:
        return {
            'phi_x': self.phi_x,
            'engine': str(self.engine),
            'I1_nA': self.i1,
            'I1_err_nA': self.i1_error,
            'I2_nA': self.i2,
            'I2_err_nA': self.i2_error,
            'label': str(self.label),
            'E0_GHz': '' if self.e0 is None else self.e0,
            'E1_GHz': '' if self.e1 is None else self.e1,
            'gap_GHz': '' if self.gap is None else self.gap,
            'trunc_bound': '' if self.trunc_bound is None else self.trunc_bound,
            'status': self.status,
        }


@dataclass(frozen=True)
class ConvergenceRow:
    """Relative error of I1 at one grid spacing against the finest spacing."""

    delta: float
    phi_x: float
    i1: float
    rel_err: float

    CSV_FIELDS = ("delta", "rel_err", "phi_x", "I1_nA")

    def to_csv_row(self) -> Dict[str, Any]:
        return {'delta': self.delta, 'rel_err': self.rel_err, 'phi_x': self.phi_x, 'I1_nA': self.i1}


@dataclass(frozen=True)
class ConvergenceStudy:
    """Rows of a grid-spacing study with its fitted order and monotonicity flag."""

    rows: Tuple[ConvergenceRow, ...]
    monotone: bool
    order: Optional[float] = None
