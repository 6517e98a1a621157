"""Unit tests for the internal unit system."""

import math

import pytest

from src.engine.units import INTERNAL_UNITS, REFERENCE_TEMPERATURE_K, UnitSystem


class TestUnitSystem:
    """Test conversions between SI and internal units."""

    @pytest.fixture
    def units(self):
        return UnitSystem()

    def test_flux_quantum_is_pi(self, units):
        """Test that hbar = e = 1 puts the flux quantum at pi."""
        assert units.phi0 == math.pi

    @pytest.mark.parametrize("name, value", [
        ("energy", 3.2e-24),
        ("capacitance", 119.5e-15),
        ("inductance", 231.9e-12),
        ("current", 3.227e-6),
        ("flux", 2.067833848e-15),
        ("angular_frequency", 2 * math.pi * 5e9),
    ])
    def test_round_trip(self, units, name, value):
        """Test SI -> internal -> SI is the identity to 1e-12."""
        internal = getattr(units, name)(value)
        back = getattr(units, f"{name}_to_si")(internal)
        assert back == pytest.approx(value, rel=1e-12)

    def test_flux_quantum_in_webers(self, units):
        """Test that the internal flux quantum maps to h/2e."""
        assert units.flux_to_si(units.phi0) == pytest.approx(2.067833848e-15, rel=1e-9)

    def test_energy_unit_is_one_gigahertz(self, units):
        """Test that one internal energy unit is h * 1 GHz."""
        assert units.energy(6.62607015e-25) == pytest.approx(1.0, rel=1e-9)

    def test_reference_beta(self, units):
        """Test the inverse temperature at 12 mK."""
        assert units.beta(REFERENCE_TEMPERATURE_K) == pytest.approx(4.0, rel=2e-3)

    def test_beta_rejects_non_positive_temperature(self, units):
        """Test that zero temperature has no finite beta."""
        with pytest.raises(ValueError, match="Temperature must be positive"):
            units.beta(0.0)

    def test_milli_flux_quanta(self, units):
        """Test bias conversion from milli flux quanta."""
        assert units.mphi0(1000.0) == pytest.approx(math.pi)
        assert units.to_mphi0(units.mphi0(0.9)) == pytest.approx(0.9)

    def test_effective_capacitance_scale(self):
        """Test the internal value of a typical loop capacitance."""
        assert INTERNAL_UNITS.capacitance(181.36e-15) == pytest.approx(4.6814, rel=1e-3)
