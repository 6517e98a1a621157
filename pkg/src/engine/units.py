"""Unit conventions: SI inputs are converted to an internal system with hbar = e = 1.

Energies are measured in units of hbar * (2 pi * 1 GHz), i.e. h * 1 GHz, which
keeps circuit energies in the range 1..1e4. Flux is measured in hbar/e, so the
flux quantum is exactly pi.
"""

from dataclasses import dataclass
import math

from scipy import constants


@dataclass(frozen=True)
class UnitSystem:
    """Internal unit system and SI conversion factors."""

    hbar: float = 1.0
    electron_charge: float = 1.0
    energy_scale: float = constants.hbar * 2.0 * math.pi * 1.0e9

    @property
    def phi0(self) -> float:
        """Flux quantum pi * hbar / e in internal units."""
        return math.pi * self.hbar / self.electron_charge

    @property
    def k_boltzmann(self) -> float:
        """Boltzmann constant in internal energy per kelvin."""
        return constants.k / self.energy_scale

    # SI -> internal
    def energy(self, joules: float) -> float:
        return joules / self.energy_scale

    def capacitance(self, farads: float) -> float:
        return farads * self.energy_scale / constants.e ** 2

    def inductance(self, henries: float) -> float:
        return henries * self.energy_scale * constants.e ** 2 / constants.hbar ** 2

    def current(self, amperes: float) -> float:
        return amperes * constants.hbar / (self.energy_scale * constants.e)

    def flux(self, webers: float) -> float:
        return webers * constants.e / constants.hbar

    def angular_frequency(self, rad_per_s: float) -> float:
        return rad_per_s * constants.hbar / self.energy_scale

    def thermal_energy(self, kelvin: float) -> float:
        return self.k_boltzmann * kelvin

    def beta(self, kelvin: float) -> float:
        """Inverse temperature 1/(k_B T) in inverse internal energy."""
        if kelvin <= 0:
            raise ValueError(f"Temperature must be positive, got {kelvin}")
        return 1.0 / self.thermal_energy(kelvin)

    # internal -> SI
    def energy_to_si(self, value: float) -> float:
        return value * self.energy_scale

    def capacitance_to_si(self, value: float) -> float:
        return value * constants.e ** 2 / self.energy_scale

    def inductance_to_si(self, value: float) -> float:
        return value * constants.hbar ** 2 / (self.energy_scale * constants.e ** 2)

    def current_to_si(self, value: float) -> float:
        return value * self.energy_scale * constants.e / constants.hbar

    def flux_to_si(self, value: float) -> float:
        return value * constants.hbar / constants.e

    def angular_frequency_to_si(self, value: float) -> float:
        return value * self.energy_scale / constants.hbar

    def mphi0(self, milli_flux_quanta: float) -> float:
        """Convert a bias given in milli flux quanta to internal flux."""
        return milli_flux_quanta * 1.0e-3 * self.phi0

    def to_mphi0(self, value: float) -> float:
        return value / (1.0e-3 * self.phi0)


INTERNAL_UNITS = UnitSystem()

REFERENCE_TEMPERATURE_K = 0.012
