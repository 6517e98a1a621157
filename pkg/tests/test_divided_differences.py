"""Unit tests for divided differences of the exponential."""

import math

import mpmath
import numpy as np
import pytest

from src.engine.divided_differences import ScaledFloat, divided_diff_exp, divided_diff_exp_log
from src.engine.errors import UsageError


def reference(nodes, beta):
    """exp(-beta J)[0, q] for J bidiagonal with the nodes on its diagonal."""
    q = len(nodes) - 1
    with mpmath.workdps(50):
        j = mpmath.zeros(q + 1, q + 1)
        for i, x in enumerate(nodes):
            j[i, i] = mpmath.mpf(x)
            if i < q:
                j[i, i + 1] = 1
        return float(mpmath.expm(-mpmath.mpf(beta) * j)[0, q])


def difference_table(nodes, beta):
    """Sign and log-magnitude from the recursive difference table at high precision."""
    xs = sorted(nodes)
    # digits cover the exp(beta * spread) range and cancellation between near-equal nodes
    digits = 150 + int(beta * (xs[-1] - xs[0]) / math.log(10)) + 10 * len(xs)
    with mpmath.workdps(digits):
        x = [mpmath.mpf(float(v)) for v in xs]
        b = mpmath.mpf(beta)
        column = [mpmath.exp(-b * v) for v in x]
        for level in range(1, len(x)):
            column = [(column[i + 1] - column[i]) / (x[i + level] - x[i]) for i in range(len(x) - level)]
        value = column[0]
        return (1 if value > 0 else -1), float(mpmath.log(abs(value)))


def wide_range_nodes(seed, size, clustered):
    """Random signs with magnitudes over 1e-3..1e3; clustered sets pair nodes 1e-6 apart."""
    rng = np.random.default_rng(seed)
    n_free = size - size // 2 if clustered else size
    free = rng.choice([-1.0, 1.0], size=n_free) * 10.0 ** rng.uniform(-3.0, 3.0, size=n_free)
    if not clustered:
        return free
    twins = free[:size // 2] + 1e-6 * rng.uniform(0.5, 2.0, size=size // 2)
    return np.concatenate([free, twins])


class TestDividedDifferences:
    """Test divided differences against closed forms and a high-precision oracle."""

    def test_single_node(self):
        """Test that one node gives the exponential itself."""
        assert divided_diff_exp([0.7], 2.0).to_float() == pytest.approx(math.exp(-1.4), rel=1e-14)

    def test_two_nodes(self):
        """Test the two-node difference quotient."""
        a, b, beta = 0.3, 1.1, 1.7
        expected = (math.exp(-beta * a) - math.exp(-beta * b)) / (a - b)
        assert divided_diff_exp([a, b], beta).to_float() == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("q", [1, 2, 5, 10])
    def test_confluent_nodes(self, q):
        """Test repeated nodes against the scaled derivative."""
        x, beta = 0.4, 1.3
        expected = (-beta) ** q * math.exp(-beta * x) / math.factorial(q)
        assert divided_diff_exp([x] * (q + 1), beta).to_float() == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("seed, size", [(0, 3), (1, 5), (2, 8), (3, 12)])
    def test_random_nodes_against_oracle(self, seed, size):
        """Test random node sets against exp of a bidiagonal matrix."""
        nodes = np.random.default_rng(seed).uniform(-3.0, 3.0, size=size)
        beta = 2.0
        assert divided_diff_exp(nodes, beta).to_float() == pytest.approx(reference(list(nodes), beta), rel=1e-10)

    @pytest.mark.parametrize("seed, size, clustered", [
        (0, 17, False),
        (1, 33, False),
        (2, 65, False),
        (3, 17, True),
        (4, 33, True),
        (5, 65, True),
        (6, 65, True),
    ])
    def test_wide_range_and_clustered_nodes(self, seed, size, clustered):
        """Test up to 65 nodes over six decades, with and without near-equal pairs."""
        nodes = wide_range_nodes(seed, size, clustered)
        sign, log_abs = divided_diff_exp_log(nodes, 1.0)
        expected_sign, expected_log = difference_table(list(nodes), 1.0)
        assert sign == expected_sign
        assert abs(log_abs - expected_log) < 1e-8

    def test_mixed_repeated_nodes(self):
        """Test a multiset with repeated and distinct nodes."""
        nodes = [1.0, 1.0, 2.0, 2.0, 2.0, -0.5]
        assert divided_diff_exp(nodes, 1.5).to_float() == pytest.approx(reference(nodes, 1.5), rel=1e-10)

    def test_order_invariance(self):
        """Test that node order does not change the value."""
        nodes = [0.2, -1.0, 2.5, 0.7]
        forward = divided_diff_exp_log(nodes, 3.0)
        backward = divided_diff_exp_log(nodes[::-1], 3.0)
        assert forward[0] == backward[0]
        assert forward[1] == pytest.approx(backward[1], abs=1e-12)

    @pytest.mark.parametrize("q", [0, 1, 2, 3, 6])
    def test_sign_alternates(self, q):
        """Test that the sign is always (-1)**q."""
        nodes = np.linspace(-2.0, 2.0, q + 1)
        assert divided_diff_exp(nodes, 1.0).sign == (-1) ** q

    def test_large_spread(self):
        """Test a spread of beta*10**3 that overflows naive evaluation."""
        value = divided_diff_exp([0.0, 1000.0], 10.0).to_float()
        assert value == pytest.approx(-1e-3, rel=1e-6)

    def test_overflowing_value(self):
        """Test that huge results stay finite in log form."""
        result = divided_diff_exp([-1000.0, -1000.0], 1.0)
        assert result.log_abs == pytest.approx(1000.0)
        assert result.sign == -1
        with pytest.raises(OverflowError):
            result.to_float()

    def test_invalid_arguments(self):
        """Test argument validation."""
        with pytest.raises(UsageError, match="at least one node"):
            divided_diff_exp([], 1.0)
        with pytest.raises(UsageError, match="beta must be positive"):
            divided_diff_exp([1.0], 0.0)


class TestScaledFloat:
    """Test the mantissa/exponent representation."""

    def test_from_log(self):
        """Test construction from sign and log-magnitude."""
        value = ScaledFloat.from_log(-1, math.log(12.0))
        assert 1.0 <= abs(value.mantissa) < 2.0
        assert value.to_float() == pytest.approx(-12.0)
        assert float(value) == pytest.approx(-12.0)

    def test_zero(self):
        """Test the zero value."""
        zero = ScaledFloat.from_log(0, 0.0)
        assert zero.sign == 0
        assert zero.log_abs == -math.inf
        assert zero.to_float() == 0.0
