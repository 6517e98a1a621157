"""Unit tests for grid construction and finite-difference discretization."""

import math

import numpy as np
import pytest
from scipy.sparse.linalg import eigsh

from src.engine.circuit import normal_mode_coefficients, normal_mode_hamiltonian
from src.engine.discretization import (
    apply,
    build_grid,
    build_grid_for_potential,
    build_raw_grid,
    discretize,
    dump_matrix,
    long_step_for,
    raw_circuit_matrix,
    stoquasticity_report,
    to_sparse,
)
from src.engine.errors import ModelError, UsageError
from src.models.circuit import AnnealPoint, CircuitParams, NormalModeHamiltonian
from src.models.grid import Grid, GridIndex


REFERENCE_PARAMS = CircuitParams(231.9, 239.1, 119.5, 116.4, 3.227, 3.157, 132.0, 0.0)


def harmonic(phi):
    return 0.5 * np.sum(np.asarray(phi) ** 2, axis=0)


class TestGrid:
    """Test grid geometry."""

    @pytest.fixture
    def grid(self):
        return Grid(n_dims=2, delta=0.5, points_per_dim=(3, 5), origin_offset=(1.0, 0.0))

    def test_axis_points_are_centered(self, grid):
        """Test that axis points are symmetric about the origin offset."""
        np.testing.assert_allclose(grid.axis_points(0), [0.5, 1.0, 1.5])
        np.testing.assert_allclose(grid.axis_points(1), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_flat_index_round_trip(self, grid):
        """Test conversions between flat and per-axis indices."""
        assert grid.strides == (5, 1)
        assert grid.flat_of((2, 3)) == 13
        index = GridIndex.from_flat(13, grid)
        assert index.coords == (2, 3)
        np.testing.assert_allclose(index.position(), [1.5, 0.5])

    def test_index_outside_grid(self, grid):
        """Test that out-of-range indices are rejected."""
        with pytest.raises(ValueError, match="outside grid"):
            GridIndex((3, 0), grid)

    def test_invalid_grid(self):
        """Test grid validation."""
        with pytest.raises(ValueError, match="spacing must be positive"):
            Grid(1, 0.0, (3,), (0.0,))
        with pytest.raises(ValueError, match="Expected 2 point counts"):
            Grid(2, 1.0, (3,), (0.0,))


class TestGridConstruction:
    """Test the boundary-margin rule of grid construction."""

    def test_harmonic_extent(self):
        """Test the extent of a harmonic well for a small margin."""
        grid = build_grid_for_potential(harmonic, 1, delta=0.1, margin=2.0)
        assert grid.shape == (21,)
        assert grid.axis_points(0)[10] == pytest.approx(0.0)

    def test_counts_are_odd(self):
        """Test that every axis gets an odd number of points."""
        grid = build_grid_for_potential(harmonic, 2, delta=0.3, margin=50.0, center=(1.0, -1.0))
        assert all(n % 2 == 1 for n in grid.shape)
        assert grid.origin_offset == (1.0, -1.0)

    @pytest.mark.parametrize("delta, margin", [(0.0, 10.0), (-1.0, 10.0), (0.1, 1.0)])
    def test_invalid_arguments(self, delta, margin):
        """Test that spacing and margin preconditions are enforced."""
        with pytest.raises(UsageError):
            build_grid_for_potential(harmonic, 1, delta=delta, margin=margin)

    def test_unbounded_potential(self):
        """Test that a potential unbounded below cannot be bracketed."""
        with pytest.raises(ModelError, match="Could not bracket"):
            build_grid_for_potential(lambda phi: -phi[0] ** 2, 1, delta=0.1, margin=2.0)

    def test_circuit_grids(self):
        """Test normal-coordinate and physical-flux grids for the circuit."""
        params = REFERENCE_PARAMS
        anneal = AnnealPoint.from_mphi0(math.pi, 0.1, 0.9)
        grid = build_grid(normal_mode_coefficients(params, anneal), anneal, delta=2.0, margin=200.0)
        assert grid.n_dims == 2
        assert grid.origin_offset == (0.0, 0.0)
        # Wells sit near 31 in normal units, so the grid must reach past them.
        assert all(grid.axis_points(k)[-1] > 31.0 for k in range(2))

        raw = build_raw_grid(params, anneal, delta=0.1, margin=200.0)
        assert raw.origin_offset == pytest.approx((anneal.phi1_z, anneal.phi2_z))


class TestDiscretize:
    """Test the permutation-matrix form of the discretized Hamiltonian."""

    @pytest.fixture
    def hamiltonian(self):
        rng = np.random.default_rng(11)
        grid = Grid(2, 0.5, (3, 4), (0.0, 0.0))
        values = rng.uniform(-1.0, 1.0, size=grid.shape)
        return discretize(NormalModeHamiltonian(mu=(0.7, 1.3), potential=lambda phi: values), grid)

    def test_one_dimensional_spectrum(self):
        """Test the free-particle spectrum of a three-point grid."""
        mu, delta = 0.5, 0.25
        grid = Grid(1, delta, (3,), (0.0,))
        h = discretize(NormalModeHamiltonian(mu=(mu,), potential=lambda phi: np.zeros(phi.shape[1:])), grid)
        expected = [2 * mu / delta ** 2 * (1 - math.cos(k * math.pi / 4)) for k in (1, 2, 3)]
        np.testing.assert_allclose(np.linalg.eigvalsh(to_sparse(h).toarray()), expected)

    def test_diagonal_and_hopping(self, hamiltonian):
        """Test the kinetic shift and hopping strengths."""
        assert hamiltonian.kinetic_shift == pytest.approx(2 * (0.7 + 1.3) / 0.25)
        assert hamiltonian.hop == pytest.approx((-0.7 / 0.25, -1.3 / 0.25))
        assert hamiltonian.labels == (1, -1, 2, -2)

    def test_shift_respects_boundaries(self, hamiltonian):
        """Test that shifts leaving the grid return -1."""
        assert hamiltonian.shift(0, 2) == 1
        assert hamiltonian.shift(0, 1) == 4
        assert hamiltonian.shift(0, -1) == -1
        assert hamiltonian.shift(3, 2) == -1
        assert hamiltonian.shift(0, 1, steps=2) == 8
        assert hamiltonian.shift(0, 1, steps=3) == -1

    def test_apply_matches_sparse_matrix(self, hamiltonian):
        """Test the matrix-free product against the assembled matrix."""
        state = np.random.default_rng(5).normal(size=hamiltonian.size)
        np.testing.assert_allclose(apply(hamiltonian, state), to_sparse(hamiltonian) @ state)

    def test_apply_rejects_wrong_shape(self, hamiltonian):
        """Test that the state length must match the grid."""
        with pytest.raises(UsageError, match="expected"):
            apply(hamiltonian, np.zeros(5))

    def test_dimension_mismatch(self):
        """Test that Hamiltonian and grid must agree on dimensions."""
        h = NormalModeHamiltonian(mu=(1.0,), potential=harmonic)
        with pytest.raises(UsageError, match="dimensions"):
            discretize(h, Grid(2, 1.0, (3, 3), (0.0, 0.0)))

    def test_normal_mode_matrix_is_stoquastic(self, hamiltonian):
        """Test that every off-diagonal element is non-positive."""
        report = stoquasticity_report(hamiltonian)
        assert report.stoquastic
        assert report.off_diagonal_count == 2 * 2 * 4 + 2 * 3 * 3
        assert report.max_off_diagonal < 0
        assert report.summary_line() == "stoquastic: true, positive off-diagonals: 0"

    def test_dump_matrix(self, hamiltonian, tmp_path):
        """Test the row/col/value dump."""
        path = tmp_path / "matrix.txt"
        count = dump_matrix(hamiltonian, path)
        lines = path.read_text().splitlines()
        assert count == len(lines) == to_sparse(hamiltonian).nnz
        entries = {(int(r), int(c)): float(v) for r, c, v in (line.split() for line in lines)}
        assert entries[(0, 0)] == pytest.approx(hamiltonian.d0[0])
        assert entries[(0, 1)] == pytest.approx(hamiltonian.hop[1])


class TestRawCircuitMatrix:
    """Test the untransformed charge-coupled discretization."""

    @pytest.fixture
    def grid(self):
        return Grid(2, 0.1, (5, 5), (0.0, 0.0))

    def test_charge_coupling_breaks_stoquasticity(self, grid):
        """Test that the Q1*Q2 cross term yields positive off-diagonals."""
        params = REFERENCE_PARAMS
        matrix = raw_circuit_matrix(params, AnnealPoint(math.pi), grid)
        report = stoquasticity_report(matrix)
        assert not report.stoquastic
        assert report.positive_off_diagonals == 2 * 4 * 4
        assert report.diagonal_shift == 0.0

    def test_uncoupled_circuit_is_stoquastic(self, grid):
        """Test that without the coupling capacitor the matrix is stoquastic."""
        params = CircuitParams(231.9, 239.1, 119.5, 116.4, 3.227, 3.157, 0.0, 0.0)
        report = stoquasticity_report(raw_circuit_matrix(params, AnnealPoint(math.pi), grid))
        assert report.stoquastic

    def test_requires_two_dimensions(self):
        """Test that the raw circuit needs a two-dimensional grid."""
        params = REFERENCE_PARAMS
        with pytest.raises(UsageError, match="two loops"):
            raw_circuit_matrix(params, AnnealPoint(0.0), Grid(1, 0.1, (5,), (0.0,)))

    def test_spectrum_matches_normal_modes(self):
        """Test that both discretizations give the same lowest levels at small spacing."""
        anneal = AnnealPoint.from_mphi0(0.0, 0.1, 0.9)
        delta = 0.25
        coeffs = normal_mode_coefficients(REFERENCE_PARAMS, anneal)
        grid = build_grid(coeffs, anneal, delta, 200.0)
        normal = to_sparse(discretize(normal_mode_hamiltonian(REFERENCE_PARAMS, anneal), grid))
        raw_grid = build_raw_grid(REFERENCE_PARAMS, anneal, delta * min(coeffs.omega_cap1, coeffs.omega_cap2), 200.0)
        raw = raw_circuit_matrix(REFERENCE_PARAMS, anneal, raw_grid)

        def lowest(m):
            # shift below the Gershgorin bound so the nearest levels are the lowest
            radius = np.asarray(abs(m).sum(axis=1)).ravel() - abs(m.diagonal())
            shift = (m.diagonal() - radius).min() - 1.0
            return np.sort(eigsh(m, k=4, sigma=shift, which='LM', return_eigenvectors=False))

        assert lowest(raw) == pytest.approx(lowest(normal), rel=1e-3)


class TestLongStep:
    """Test the long-move step heuristic."""

    @pytest.fixture
    def grid(self):
        return Grid(1, 1.0, (31,), (0.0,))

    def test_double_well_separation(self, grid):
        """Test that the step equals the separation of two wells."""
        h = discretize(NormalModeHamiltonian(mu=(1.0,), potential=lambda x: (x[0] ** 2 - 25.0) ** 2), grid)
        assert long_step_for(h) == 10

    def test_single_well_fallback(self, grid):
        """Test the fallback of half the largest axis."""
        h = discretize(NormalModeHamiltonian(mu=(1.0,), potential=harmonic), grid)
        assert long_step_for(h) == 15
