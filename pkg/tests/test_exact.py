"""Unit tests for the exact-diagonalization engine."""

import math

import numpy as np
import pytest
from scipy import linalg

from src.engine.discretization import discretize, to_sparse
from src.engine.errors import NumericalError, TruncationError, UsageError
from src.engine.exact import (
    currents_nanoampere,
    lowest_eigenpairs,
    mean_flux,
    persistent_currents,
    thermal_average,
    thermal_eigenpairs,
)
from src.engine.units import INTERNAL_UNITS
from src.models.circuit import AnnealPoint, CircuitParams, NormalModeHamiltonian
from src.models.enums import EigenSolver
from src.models.grid import Grid
from src.models.thermal import ThermalSpec


def harmonic(phi):
    return 0.5 * np.sum(np.asarray(phi) ** 2, axis=0)


class TestLowestEigenpairs:
    """Test eigenpair computation."""

    @pytest.fixture
    def oscillator(self):
        # mu = 1/2 and V = phi**2/2 give levels n + 1/2
        grid = Grid(1, 0.02, (801,), (0.0,))
        return discretize(NormalModeHamiltonian(mu=(0.5,), potential=harmonic), grid)

    @pytest.fixture
    def small_2d(self):
        grid = Grid(2, 0.4, (15, 13), (0.0, 0.0))
        potential = lambda phi: harmonic(phi) + 0.3 * np.cos(phi[0] * phi[1])
        return discretize(NormalModeHamiltonian(mu=(0.5, 0.8), potential=potential), grid)

    def test_harmonic_ground_state(self, oscillator):
        """Test the oscillator levels against n + 1/2."""
        eig = lowest_eigenpairs(oscillator, 3)
        np.testing.assert_allclose(eig.values, [0.5, 1.5, 2.5], atol=1e-3)
        assert eig.values[0] == pytest.approx(0.5, abs=1e-4)
        assert eig.gap == pytest.approx(1.0, abs=1e-3)

    def test_vectors_are_orthonormal(self, oscillator):
        """Test orthonormality of the returned eigenvectors."""
        eig = lowest_eigenpairs(oscillator, 4)
        np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(4), atol=1e-10)
        assert eig.residuals.shape == (4,)

    @pytest.mark.parametrize("solver", [EigenSolver.LANCZOS, EigenSolver.SHIFT_INVERT])
    def test_solvers_agree_with_dense(self, small_2d, solver):
        """Test iterative back-ends against dense diagonalization."""
        dense = lowest_eigenpairs(small_2d, 4, EigenSolver.DENSE)
        other = lowest_eigenpairs(small_2d, 4, solver)
        np.testing.assert_allclose(other.values, dense.values, rtol=1e-8, atol=1e-8)

    @pytest.mark.parametrize("k", [0, 196])
    def test_k_out_of_range(self, small_2d, k):
        """Test that k must lie in [1, dimension]."""
        with pytest.raises(UsageError, match="eigenpairs"):
            lowest_eigenpairs(small_2d, k)

    def test_full_spectrum(self, small_2d):
        """Test that requesting every level falls back to dense."""
        eig = lowest_eigenpairs(small_2d, small_2d.size, EigenSolver.LANCZOS)
        np.testing.assert_allclose(eig.values, np.linalg.eigvalsh(to_sparse(small_2d).toarray()),
                                   atol=1e-8)

    def test_lanczos_iteration_budget(self, oscillator):
        """Test that an exhausted iteration budget raises a numerical error."""
        with pytest.raises(NumericalError, match="did not converge"):
            lowest_eigenpairs(oscillator, 4, EigenSolver.LANCZOS, maxiter=1)


class TestThermalAverages:
    """Test truncated thermal averages."""

    @pytest.fixture
    def spec(self):
        return ThermalSpec()

    @pytest.fixture
    def oscillator(self):
        grid = Grid(1, 0.02, (801,), (0.0,))
        return discretize(NormalModeHamiltonian(mu=(0.5,), potential=harmonic), grid)

    @pytest.fixture
    def six_sites(self):
        values = np.array([0.0, 0.5, 1.0, 0.3, 0.8, 0.2])
        grid = Grid(1, 1.0, (6,), (0.0,))
        return discretize(NormalModeHamiltonian(mu=(1.0,), potential=lambda phi: values), grid)

    def test_full_spectrum_is_exact(self, six_sites, spec):
        """Test the thermal average against the matrix exponential."""
        obs = np.arange(6, dtype=float)
        eig = lowest_eigenpairs(six_sites, 6)
        result = thermal_average(obs, eig, spec)

        rho = linalg.expm(-spec.beta * to_sparse(six_sites).toarray())
        expected = float(np.diag(rho) @ obs / np.trace(rho))
        assert result.value == pytest.approx(expected, rel=1e-10)
        assert result.bound == 0.0
        assert result.levels == 6

    def test_eigenpair_count_grows(self, oscillator, spec):
        """Test that levels are added until the last weight is negligible."""
        eig = thermal_eigenpairs(oscillator, spec, k_start=2)
        assert eig.count == 8

    def test_oscillator_flux_variance(self, oscillator, spec):
        """Test <phi**2> against the closed form coth(beta/2)/2."""
        eig = thermal_eigenpairs(oscillator, spec)
        phi = oscillator.grid.axis_points(0)
        result = thermal_average(phi ** 2, eig, spec)
        assert result.value == pytest.approx(0.5 / math.tanh(spec.beta / 2), rel=1e-3)
        assert 0 < result.bound < 1e-6

    def test_insufficient_levels(self, oscillator, spec):
        """Test that a large neglected weight raises a truncation error."""
        eig = lowest_eigenpairs(oscillator, 2)
        with pytest.raises(TruncationError, match="request more eigenpairs"):
            thermal_average(np.ones(oscillator.size), eig, spec)

    def test_observable_length(self, six_sites, spec):
        """Test that the observable must match the grid."""
        eig = lowest_eigenpairs(six_sites, 6)
        with pytest.raises(UsageError, match="expected 6"):
            thermal_average(np.ones(5), eig, spec)

    def test_mean_flux_transform(self, six_sites, spec):
        """Test the linear map from grid coordinates to physical flux."""
        eig = lowest_eigenpairs(six_sites, 6)
        (plain,) = mean_flux(eig, spec, six_sites.grid)
        (mapped,) = mean_flux(eig, spec, six_sites.grid, (np.array([[2.0]]), np.array([1.0])))
        assert mapped.value == pytest.approx(2.0 * plain.value + 1.0)


class TestPersistentCurrents:
    """Test currents derived from mean fluxes."""

    def test_uncoupled_currents(self):
        """Test I = (Phi - bias) / L without mutual inductance."""
        params = CircuitParams(231.9, 239.1, 119.5, 116.4, 3.227, 3.157, 132.0, 0.0)
        anneal = AnnealPoint(math.pi, 0.01, -0.02)
        c = params.to_internal()
        i1, i2 = persistent_currents(1.0, -1.0, anneal, params)
        assert i1 == pytest.approx(0.99 / c.l1)
        assert i2 == pytest.approx(-0.98 / c.l2)

    def test_mutual_inductance_mixes_loops(self):
        """Test that a mutual inductance feeds one loop flux into the other current."""
        params = CircuitParams(231.9, 239.1, 119.5, 116.4, 3.227, 3.157, 132.0, 10.0)
        i1, i2 = persistent_currents(0.0, 1.0, AnnealPoint(0.0), params)
        assert i1 > 0
        assert i1 == pytest.approx(i2 * 10.0 / 231.9)

    def test_nanoampere_conversion(self):
        """Test conversion of internal currents to nanoampere."""
        internal = INTERNAL_UNITS.current(1e-6)
        assert currents_nanoampere((internal, -internal)) == pytest.approx((1000.0, -1000.0))
