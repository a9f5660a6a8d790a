"""Electric-field noise metrics derived from heating rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import CODATA, ConstantsTable
from .errors import IonHeatError
from .physics import TrapConfig

PATCH_DISTANCE_EXPONENT = 4.0


@dataclass(frozen=True)
class GeometryFactor:
    """Voltage-to-field coupling: a voltage ``V`` on the electrodes gives a field ``V / D``."""

    effective_distance: float  # m

    def __post_init__(self):
        if not self.effective_distance > 0:
            raise IonHeatError("effective distance must be positive")


@dataclass(frozen=True)
class FieldNoisePoint:
    spectral_density: float  # V^2 m^-2 Hz^-1
    angular_frequency: float  # rad/s
    temperature: float | None = None  # K
    distance: float | None = None  # m
    label: str = ""

    def __post_init__(self):
        if not self.spectral_density >= 0:
            raise IonHeatError("spectral density must be >= 0")
        if not self.angular_frequency > 0:
            raise IonHeatError("angular frequency must be positive")


def _se_per_rate(trap: TrapConfig, constants: ConstantsTable) -> float:
    m = trap.species.mass_kg(constants)
    q = trap.species.charge_coulomb(constants)
    return 4 * m * constants.hbar * trap.angular_frequency / q**2


def rate_to_SE(rate: float, trap: TrapConfig, constants: ConstantsTable = CODATA) -> float:
    """Field noise ``S_E = 4 m hbar omega / q**2 * rate`` (V^2/m^2/Hz)."""
    if rate < 0:
        raise IonHeatError("heating rate must be >= 0")
    return _se_per_rate(trap, constants) * rate


def SE_to_rate(spectral_density: float, trap: TrapConfig, constants: ConstantsTable = CODATA) -> float:
    """Heating rate (quanta/s) implied by a field-noise spectral density."""
    if spectral_density < 0:
        raise IonHeatError("spectral density must be >= 0")
    return spectral_density / _se_per_rate(trap, constants)


def frequency_normalized_SE(point: FieldNoisePoint) -> float:
    """``omega * S_E`` in V^2/m^2."""
    return point.angular_frequency * point.spectral_density


def distance_rescale(
    spectral_density: float, d_from: float, d_to: float, exponent: float = PATCH_DISTANCE_EXPONENT
) -> float:
    """Scale ``S_E`` measured at ``d_from`` to ``d_to`` assuming ``S_E ~ d**-exponent``."""
    if not (d_from > 0 and d_to > 0):
        raise IonHeatError("distances must be positive")
    return spectral_density * (d_from / d_to) ** exponent


def voltage_to_field(voltage_density: float, geometry: GeometryFactor) -> float:
    """Field noise from electrode voltage noise ``S_V`` (V^2/Hz)."""
    if voltage_density < 0:
        raise IonHeatError("voltage noise density must be >= 0")
    return voltage_density / geometry.effective_distance**2


def field_to_voltage(spectral_density: float, geometry: GeometryFactor) -> float:
    if spectral_density < 0:
        raise IonHeatError("spectral density must be >= 0")
    return spectral_density * geometry.effective_distance**2


def johnson_SE(
    resistance: float,
    temperature: float,
    geometry: GeometryFactor,
    constants: ConstantsTable = CODATA,
) -> float:
    """Thermal (Johnson) field noise ``4 k_B T R / D**2``."""
    if resistance < 0 or temperature < 0:
        raise IonHeatError("resistance and temperature must be >= 0")
    return 4 * constants.boltzmann * temperature * resistance / geometry.effective_distance**2


def geometry_from_noise_pair(voltage_noise: float, spectral_density: float) -> GeometryFactor:
    """Effective distance linking an amplitude voltage noise (V/sqrt(Hz)) to ``S_E``."""
    if not (voltage_noise > 0 and spectral_density > 0):
        raise IonHeatError("calibration values must be positive")
    return GeometryFactor(math.sqrt(voltage_noise**2 / spectral_density))


def johnson_resistance(
    spectral_density: float,
    temperature: float,
    geometry: GeometryFactor,
    constants: ConstantsTable = CODATA,
) -> float:
    """Resistance for which :func:`johnson_SE` returns ``spectral_density``."""
    if not (spectral_density > 0 and temperature > 0):
        raise IonHeatError("calibration values must be positive")
    return spectral_density * geometry.effective_distance**2 / (4 * constants.boltzmann * temperature)


def gate_error(rate: float, gate_time: float) -> float:
    """Heating-limited two-qubit gate error, ``rate * gate_time`` to first order."""
    if rate < 0 or gate_time < 0:
        raise IonHeatError("rate and gate time must be >= 0")
    return rate * gate_time
