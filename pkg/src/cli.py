"""Command-line surface of the simulator.

Each invocation runs one mode, writes its result files and a manifest into
the output directory, and returns a process exit code. Failures are reported
as a single ``error category=... code=...`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.logging import RichHandler

from .data.data_manager import RunOutputManager, read_config_text
from .engine.anneal import (
    build_point,
    delta_convergence_study,
    exact_point,
    final_readout,
    point_seeds,
    qmc_point,
    sweep,
)
from .engine.circuit import (
    default_biases,
    load_params,
    normal_mode_coefficients,
    potential_surface_export,
    surface_minima,
)
from .engine.discretization import (
    build_raw_grid,
    dump_matrix,
    raw_circuit_matrix,
    stoquasticity_report,
)
from .engine.error_handler import ErrorHandler
from .engine.errors import ConfigurationError, FluxStoqError
from .models.anneal import AnnealSchedule, ConvergenceRow, GridSpec, QmcBudget, ReadoutRow
from .models.circuit import AnnealPoint, CircuitParams
from .models.enums import EigenSolver, Engine, MoveKind, RunMode
from .models.grid import StoquasticityReport
from .models.qmc import DEFAULT_MOVE_MIX
from .models.thermal import ThermalSpec


logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "FLUXSTOQ_LOG_LEVEL"

DEFAULT_PHIX = {
    RunMode.ED: (math.pi,),
    RunMode.QMC: (math.pi,),
    RunMode.SWEEP: tuple(np.linspace(0.0, math.pi, 9)),
    RunMode.CONVERGENCE: (math.pi / 2, 3 * math.pi / 4, math.pi),
    RunMode.SURFACE: (0.0, math.pi),
    RunMode.STOQ_CHECK: (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi),
}
DEFAULT_DELTAS = (2.0, 1.0, 0.5, 0.2)


def parse_angle(token: str) -> float:
    """Parse a transverse flux such as ``1.2``, ``pi``, ``0.75pi`` or ``pi/2``."""
    text = token.strip().lower()
    try:
        if "pi" not in text:
            return float(text)
        head, _, tail = text.partition("pi")
        factor = float(head.rstrip("*")) if head.rstrip("*") else 1.0
        divisor = float(tail.lstrip("/")) if tail else 1.0
        return factor * math.pi / divisor
    except ValueError:
        raise ConfigurationError(f"Cannot parse flux value '{token}'", "--phix") from None


def parse_phix(text: str) -> Tuple[float, ...]:
    """Parse ``--phix`` as a comma list or as ``start:stop:count``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"Range must be start:stop:count, got '{text}'", "--phix")
        start, stop = parse_angle(parts[0]), parse_angle(parts[1])
        try:
            count = int(parts[2])
        except ValueError:
            raise ConfigurationError(f"Range count must be an integer, got '{parts[2]}'", "--phix") from None
        if count < 1:
            raise ConfigurationError(f"Range count must be positive, got {count}", "--phix")
        return tuple(float(v) for v in np.linspace(start, stop, count))
    return tuple(parse_angle(t) for t in text.split(",") if t.strip())


def parse_float_list(text: str, flag: str, expected: Optional[int] = None) -> Tuple[float, ...]:
    try:
        values = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigurationError(f"Cannot parse '{text}' as numbers", flag) from None
    if expected is not None and len(values) != expected:
        raise ConfigurationError(f"{flag} takes {expected} comma-separated values, got '{text}'", flag)
    return values


def parse_move_mix(text: str) -> Tuple[float, float, float, float]:
    """Parse four positional probabilities or ``key=value`` pairs such as ``short=0.5,cycle=0.5``.

    Moves left out of a keyed mix get probability zero.
    """
    if "=" not in text:
        return parse_float_list(text, "--move-mix", expected=len(MoveKind))

    mix = dict.fromkeys(MoveKind, 0.0)
    for token in (t.strip() for t in text.split(",") if t.strip()):
        key, _, value = (part.strip() for part in token.partition("="))
        try:
            kind = MoveKind.from_key(key)
        except KeyError:
            raise ConfigurationError(
                f"Unknown move '{key}', expected one of {', '.join(k.key for k in MoveKind)}",
                "--move-mix") from None
        try:
            mix[kind] = float(value)
        except ValueError:
            raise ConfigurationError(
                f"Cannot parse '{value}' as the probability of {kind.display_name}", "--move-mix") from None
    return tuple(mix[kind] for kind in MoveKind)


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs, resolved from flags and the circuit file."""

    mode: RunMode
    circuit_path: Path
    params: CircuitParams
    biases_mphi0: Tuple[float, float]
    phi_x_points: Tuple[float, ...]
    grid: GridSpec
    deltas: Tuple[float, ...]
    thermal: ThermalSpec
    qmc: QmcBudget
    engine: Engine
    solver: EigenSolver
    out_dir: Path
    dump_matrix: bool = False
    dump_samples: bool = False
    workers: Optional[int] = None
    flags: Dict[str, Any] = field(default_factory=dict)

    def anneal_points(self) -> List[AnnealPoint]:
        b1, b2 = self.biases_mphi0
        return [AnnealPoint.from_mphi0(p, b1, b2) for p in self.phi_x_points]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mode': str(self.mode),
            'circuit': str(self.circuit_path),
            'params': self.params.to_dict(),
            'biases_mphi0': list(self.biases_mphi0),
            'phi_x_points': list(self.phi_x_points),
            'delta': self.grid.delta,
            'margin': self.grid.margin,
            'deltas': list(self.deltas),
            'thermal': self.thermal.to_dict(),
            'qmc': {
                'n_sweeps': self.qmc.n_sweeps,
                'n_chains': self.qmc.n_chains,
                'seed': self.qmc.seed,
                'move_mix': list(self.qmc.move_mix),
                'burn_in': self.qmc.burn_in,
                'n_bins': self.qmc.n_bins,
            },
            'engine': str(self.engine),
            'eigensolver': str(self.solver),
            'out_dir': str(self.out_dir),
            'dump_matrix': self.dump_matrix,
            'dump_samples': self.dump_samples,
            'argv': self.flags.get('argv', []),
        }


class ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors exit with the configuration exit code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f'error category=configuration code=2 type=UsageError message="{message}"',
              file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="fluxstoq",
        description="Stoquastic simulation of coupled rf-SQUID flux qubits.",
    )
    parser.add_argument("--mode", required=True, choices=[m.value for m in RunMode])
    parser.add_argument("--circuit", type=Path, default=Path("data/params.cfg"),
                        help="TOML circuit file with unit-suffixed keys")
    parser.add_argument("--bias", help="phi1_z,phi2_z in milli flux quanta")
    parser.add_argument("--phix", help="comma list or start:stop:count; accepts pi, 0.75pi, pi/2")
    parser.add_argument("--delta", type=float, default=GridSpec().delta, help="grid spacing")
    parser.add_argument("--deltas", help="comma list of spacings for --mode convergence")
    parser.add_argument("--margin", type=float, default=GridSpec().margin,
                        help="boundary margin in units of k_B T at 12 mK")
    parser.add_argument("--temp-mK", dest="temp_mk", type=float, default=12.0)
    parser.add_argument("--sweeps", type=int, default=QmcBudget().n_sweeps)
    parser.add_argument("--chains", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--move-mix", dest="move_mix",
                        help="short,long,block_swap,cycle selection probabilities, positional or key=value")
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--engine", choices=[e.value for e in Engine])
    parser.add_argument("--eigensolver", choices=[s.value for s in EigenSolver],
                        default=EigenSolver.SHIFT_INVERT.value)
    parser.add_argument("--workers", type=int, help="worker processes, capped by FLUXSTOQ_THREADS")
    parser.add_argument("--dump-matrix", action="store_true", help="write matrix.txt (ed mode)")
    parser.add_argument("--dump-samples", action="store_true", help="write samples.csv (qmc mode)")
    parser.add_argument("--log-level", default=os.environ.get(LOG_LEVEL_ENV, "WARNING"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def configure_logging(level: str) -> None:
    """Route log records to stderr through rich."""
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    root = logging.getLogger()
    for existing in list(root.handlers):
        if isinstance(existing, RichHandler):
            root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level)


def resolve_config(args: argparse.Namespace, argv: Sequence[str]) -> RunConfig:
    """Combine flags with the circuit file into a validated RunConfig."""
    mode = RunMode(args.mode)
    if not args.circuit.is_file():
        raise ConfigurationError(f"Circuit file {args.circuit} does not exist", "--circuit")
    text = read_config_text(args.circuit)
    params = load_params(text)

    biases = parse_float_list(args.bias, "--bias", expected=2) if args.bias else default_biases(text)
    phi_x = parse_phix(args.phix) if args.phix else DEFAULT_PHIX[mode]
    if not phi_x:
        raise ConfigurationError("No transverse flux points given", "--phix")
    deltas = parse_float_list(args.deltas, "--deltas") if args.deltas else DEFAULT_DELTAS

    if args.engine:
        engine = Engine(args.engine)
    elif mode is RunMode.SWEEP:
        engine = Engine.BOTH
    else:
        engine = Engine.QMC if mode is RunMode.QMC else Engine.ED

    qmc = QmcBudget(
        n_sweeps=args.sweeps,
        n_chains=args.chains,
        seed=args.seed,
        move_mix=parse_move_mix(args.move_mix) if args.move_mix else DEFAULT_MOVE_MIX,
    )
    return RunConfig(
        mode=mode,
        circuit_path=args.circuit,
        params=params,
        biases_mphi0=(float(biases[0]), float(biases[1])),
        phi_x_points=tuple(float(p) for p in phi_x),
        grid=GridSpec(args.delta, args.margin),
        deltas=tuple(deltas),
        thermal=ThermalSpec.from_millikelvin(args.temp_mk),
        qmc=qmc,
        engine=engine,
        solver=EigenSolver(args.eigensolver),
        out_dir=args.out,
        dump_matrix=args.dump_matrix,
        dump_samples=args.dump_samples,
        workers=args.workers,
        flags={'argv': list(argv)},
    )


@dataclass
class ModeResult:
    """Console lines and manifest extras produced by one mode."""

    lines: List[str] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)


def _rows_to_csv(output: RunOutputManager, name: str, rows: Sequence[ReadoutRow]) -> None:
    output.write_csv(name, ReadoutRow.CSV_FIELDS, [r.to_csv_row() for r in rows])


def run_ed(config: RunConfig, output: RunOutputManager) -> ModeResult:
    result = ModeResult()
    rows = []
    for i, point in enumerate(config.anneal_points()):
        model = build_point(config.params, point, config.grid)
        if config.dump_matrix:
            name = "matrix.txt" if len(config.phi_x_points) == 1 else f"matrix_{i}.txt"
            dump_matrix(model.pmr, output.path_for(name))
            output.files_written.append(name)
        row = exact_point(config.params, point, config.grid, config.thermal, config.solver, model=model)
        rows.append(row)
        gap = "n/a" if row.gap is None else f"{row.gap:.6g} GHz"
        result.lines.append(f"phi_x={row.phi_x:.6g} I1={row.i1:.6g} nA I2={row.i2:.6g} nA "
                            f"readout={row.label} gap={gap}")
    _rows_to_csv(output, "ed.csv", rows)
    return result


def run_qmc(config: RunConfig, output: RunOutputManager) -> ModeResult:
    result = ModeResult()
    rows, stats_out = [], []
    seeds = point_seeds(config.qmc.seed, len(config.phi_x_points))
    for i, (point, seed) in enumerate(zip(config.anneal_points(), seeds)):
        row, stats = qmc_point(config.params, point, config.grid, config.thermal, config.qmc, seed,
                               chain_workers=config.workers, keep_samples=config.dump_samples)
        rows.append(row)
        stats_out.append({'phi_x': point.phi_x, **stats.to_dict()})
        result.seeds.extend(stats.seeds)
        if config.dump_samples and stats.samples is not None:
            name = "samples.csv" if len(seeds) == 1 else f"samples_{i}.csv"
            columns = ["sweep", "q", "Phi1", "Phi2"]
            output.write_samples(name, {c: stats.samples[:, j] for j, c in enumerate(columns)})
        result.lines.append(f"phi_x={row.phi_x:.6g} I1={row.i1:.6g}+-{row.i1_error:.3g} nA "
                            f"I2={row.i2:.6g}+-{row.i2_error:.3g} nA readout={row.label}")
    _rows_to_csv(output, "qmc.csv", rows)
    output.write_json("qmc_stats.json", stats_out)
    return result


def run_sweep(config: RunConfig, output: RunOutputManager) -> ModeResult:
    schedule = AnnealSchedule(
        phi_x_points=config.phi_x_points,
        biases_mphi0=config.biases_mphi0,
        engine=config.engine,
        grid=config.grid,
        qmc=config.qmc,
        thermal=config.thermal,
        solver=config.solver,
    )
    rows = sweep(schedule, config.params, workers=config.workers)
    _rows_to_csv(output, "anneal.csv", rows)

    readouts = {str(e): str(final_readout(rows, e))
                for e in (Engine.ED, Engine.QMC) if schedule.engine.includes(e)}
    output.write_json("anneal.json", {
        'schedule': schedule.to_dict(),
        'params': config.params.to_dict(),
        'final_readout': readouts,
        'point_seeds': point_seeds(config.qmc.seed, len(config.phi_x_points)),
        'failed_rows': sum(r.failed for r in rows),
    })
    result = ModeResult(seeds=point_seeds(config.qmc.seed, len(config.phi_x_points)))
    result.lines.extend(f"final readout ({engine}): {label}" for engine, label in readouts.items())
    return result


def run_convergence(config: RunConfig, output: RunOutputManager) -> ModeResult:
    result = ModeResult()
    rows: List[ConvergenceRow] = []
    studies = []
    for point in config.anneal_points():
        study = delta_convergence_study(point, config.deltas, config.params, margin=config.grid.margin,
                                        thermal=config.thermal, solver=config.solver)
        rows.extend(study.rows)
        studies.append({'phi_x': point.phi_x, 'monotone': study.monotone, 'order': study.order})
        order = "n/a" if study.order is None else f"{study.order:.3f}"
        result.lines.append(f"phi_x={point.phi_x:.6g} order={order} monotone={str(study.monotone).lower()}")

    output.write_csv("convergence.csv", ConvergenceRow.CSV_FIELDS, [r.to_csv_row() for r in rows])
    output.write_json("convergence.json", {
        'params': config.params.to_dict(),
        'biases_mphi0': list(config.biases_mphi0),
        'margin': config.grid.margin,
        'reference': 'smallest spacing, exact diagonalization',
        'studies': studies,
    })
    return result


def run_surface(config: RunConfig, output: RunOutputManager) -> ModeResult:
    result = ModeResult()
    rows, minima = [], []
    for point in config.anneal_points():
        model = build_point(config.params, point, config.grid)
        coeffs = normal_mode_coefficients(config.params, point)
        table = potential_surface_export(point, coeffs, model.grid.axis_points(0), model.grid.axis_points(1))
        found = surface_minima(table)
        minima.append({'phi_x': point.phi_x, 'minima': [list(m) for m in found]})
        rows.extend({'phi_x': point.phi_x, 'phi1': r[0], 'phi2': r[1], 'V_GHz': r[2]} for r in table)
        result.lines.append(f"phi_x={point.phi_x:.6g} local minima: {len(found)}")
    output.write_csv("surface.csv", ("phi_x", "phi1", "phi2", "V_GHz"), rows)
    output.write_json("surface.json", {'minima': minima})
    return result


def _combine_reports(reports: Sequence[StoquasticityReport]) -> StoquasticityReport:
    return StoquasticityReport(
        max_off_diagonal=max(r.max_off_diagonal for r in reports),
        positive_off_diagonals=sum(r.positive_off_diagonals for r in reports),
        off_diagonal_count=sum(r.off_diagonal_count for r in reports),
        diagonal_shift=max(r.diagonal_shift for r in reports),
    )


def run_stoq_check(config: RunConfig, output: RunOutputManager) -> ModeResult:
    normal, raw, per_point = [], [], []
    for point in config.anneal_points():
        model = build_point(config.params, point, config.grid)
        report = stoquasticity_report(model.pmr)

        coeffs = model.hamiltonian.coeffs
        raw_delta = config.grid.delta * min(coeffs.omega_cap1, coeffs.omega_cap2)
        raw_grid = build_raw_grid(config.params, point, raw_delta, config.grid.margin)
        raw_report = stoquasticity_report(raw_circuit_matrix(config.params, point, raw_grid))

        normal.append(report)
        raw.append(raw_report)
        per_point.append({'phi_x': point.phi_x, 'normal_mode': report.to_dict(), 'raw': raw_report.to_dict()})

    combined = _combine_reports(normal)
    raw_combined = _combine_reports(raw)
    output.write_json("stoq_check.json", {
        'normal_mode': combined.to_dict(),
        'raw': raw_combined.to_dict(),
        'points': per_point,
    })
    return ModeResult(lines=[
        combined.summary_line(),
        f"raw charge-coupled discretization, positive off-diagonals: {raw_combined.positive_off_diagonals}",
    ])


MODE_HANDLERS: Dict[RunMode, Callable[[RunConfig, RunOutputManager], ModeResult]] = {
    RunMode.ED: run_ed,
    RunMode.QMC: run_qmc,
    RunMode.SWEEP: run_sweep,
    RunMode.CONVERGENCE: run_convergence,
    RunMode.SURFACE: run_surface,
    RunMode.STOQ_CHECK: run_stoq_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one invocation and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.log_level)
    output: Optional[RunOutputManager] = None
    config: Optional[RunConfig] = None
    try:
        config = resolve_config(args, argv)
        output = RunOutputManager(config.out_dir)
        result = MODE_HANDLERS[config.mode](config, output)
        output.write_manifest(config.to_dict(), seeds=result.seeds,
                              extra={'status': 'ok', **result.extra})
    except (FluxStoqError, ArithmeticError, ValueError, OSError, RuntimeError) as e:
        failure = ErrorHandler.classify(e, {'mode': args.mode})
        if output is not None and config is not None:
            try:
                output.write_manifest(config.to_dict(), extra={'status': 'failed', 'failure': failure.to_dict()})
            except FluxStoqError:
                logger.error("Could not write the manifest of the failed run")
        print(failure.summary_line(), file=sys.stderr)
        return failure.exit_code

    for line in result.lines:
        print(line)
    return 0
