# Models package

from .enums import BoundaryPolicy, EigenSolver, Engine, MoveKind, QubitLabel, RunMode
from .circuit import AnnealPoint, CircuitParams, NormalModeCoefficients, NormalModeHamiltonian
from .grid import Grid, GridIndex, PmrHamiltonian, StoquasticityReport
from .thermal import EigenSet, ThermalAverage, ThermalSpec
from .qmc import MoveCounter, MoveParams, ObservableEstimate, QmcConfiguration, RunStats
from .anneal import AnnealSchedule, ConvergenceRow, ConvergenceStudy, GridSpec, QmcBudget, ReadoutRow

__all__ = [
    'BoundaryPolicy', 'EigenSolver', 'Engine', 'MoveKind', 'QubitLabel', 'RunMode',
    'AnnealPoint', 'CircuitParams', 'NormalModeCoefficients', 'NormalModeHamiltonian',
    'Grid', 'GridIndex', 'PmrHamiltonian', 'StoquasticityReport',
    'EigenSet', 'ThermalAverage', 'ThermalSpec',
    'MoveCounter', 'MoveParams', 'ObservableEstimate', 'QmcConfiguration', 'RunStats',
    'AnnealSchedule', 'ConvergenceRow', 'ConvergenceStudy', 'GridSpec', 'QmcBudget', 'ReadoutRow',
]
