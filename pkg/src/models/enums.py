"""Core enumerations for the flux-circuit simulator."""

from enum import Enum


class Engine(Enum):
    """Engines that can evaluate a point of an anneal."""

    ED = "ed"
    QMC = "qmc"
    BOTH = "both"

    def __str__(self) -> str:
        return self.value

    def includes(self, other: 'Engine') -> bool:
        """Check if this selection runs the given single engine."""
        return self is Engine.BOTH or self is other


class MoveKind(Enum):
    """QMC update moves with their display names."""

    SHORT = ("short", "Classical move (short step)")
    LONG = ("long", "Classical move (long step)")
    BLOCK_SWAP = ("block_swap", "Block swap")
    CYCLE = ("cycle", "Cycle completion")

    def __init__(self, key: str, display_name: str):
        self.key = key
        self.display_name = display_name

    def __str__(self) -> str:
        return self.key

    @classmethod
    def from_key(cls, key: str) -> 'MoveKind':
        for kind in cls:
            if kind.key == key:
                return kind
        raise KeyError(key)


class BoundaryPolicy(Enum):
    """How shifts leaving the grid are treated."""

    DIRICHLET = "dirichlet"

    def __str__(self) -> str:
        return self.value


class QubitLabel(Enum):
    """Two-qubit readout obtained from persistent-current signs."""

    ZERO_ZERO = "00"
    ZERO_ONE = "01"
    ONE_ZERO = "10"
    ONE_ONE = "11"
    INDETERMINATE = "INDETERMINATE"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_bits(cls, bit1: int, bit2: int) -> 'QubitLabel':
        return cls(f"{bit1}{bit2}")


class RunMode(Enum):
    """Command-line run modes."""

    ED = "ed"
    QMC = "qmc"
    SWEEP = "sweep"
    CONVERGENCE = "convergence"
    SURFACE = "surface"
    STOQ_CHECK = "stoq-check"

    def __str__(self) -> str:
        return self.value


class EigenSolver(Enum):
    """Eigensolver back-ends of the exact engine."""

    AUTO = "auto"
    DENSE = "dense"
    LANCZOS = "lanczos"
    SHIFT_INVERT = "shift-invert"

    def __str__(self) -> str:
        return self.value
