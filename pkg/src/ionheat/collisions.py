"""Background-gas collisions and the apparent heating they produce.

Rare elastic collisions leave a small fraction of experiments with a hot ion
whose red and blue sidebands are equally strong. Averaged with the cold
majority this mimics a thermal state, so the sideband-ratio method reports an
occupation that grows with probe delay even without any electric-field noise.
This module holds the resulting occupation formulas, the inversion from
elastic rate to gas density, the Langevin capture rate and a simple
collision-safety test based on ion lifetime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import CM3_TO_M3, CODATA, PER_CM3_TO_PER_M3, ConstantsTable
from .errors import FitError, IonHeatError, ModelValidityError
from .fitting import levenberg_marquardt, weighted_linear_fit
from .inference import HeatingSeries
from .physics import IonSpecies

#: Prefactor of the thermally averaged ion-neutral elastic rate; SI inputs
#: (density m^-3, relative speed m/s, polarizability volume m^3) give s^-1.
ELASTIC_RATE_COEFFICIENT = 1.23e5
SAFETY_THRESHOLD = 100.0
SAFETY_MARGIN = 10.0


@dataclass(frozen=True)
class GasSpecies:
    name: str
    mass: float  # amu
    polarizability: float  # polarizability volume, cm^3
    temperature: float  # K

    def __post_init__(self):
        if not self.mass > 0:
            raise IonHeatError("gas mass must be positive")
        if not self.polarizability > 0:
            raise IonHeatError("polarizability must be positive")
        if not self.temperature > 0:
            raise IonHeatError("gas temperature must be positive")

    def at_temperature(self, temperature: float) -> GasSpecies:
        return GasSpecies(self.name, self.mass, self.polarizability, temperature)


@dataclass(frozen=True)
class CollisionModel:
    gamma_e: float  # elastic collisions per second
    gamma_a: float = 0.0  # anomalous heating, quanta per second

    def __post_init__(self):
        if not (self.gamma_e >= 0 and self.gamma_a >= 0):
            raise IonHeatError("collision and heating rates must be >= 0")


@dataclass(frozen=True)
class LifetimeObservation:
    lifetime: float  # s
    delay: float  # s
    heating_rate: float  # quanta/s

    def __post_init__(self):
        if not (self.lifetime > 0 and self.delay > 0 and self.heating_rate > 0):
            raise IonHeatError("lifetime, delay and heating rate must be positive")


@dataclass(frozen=True)
class GammaEFit:
    gamma_e: float
    gamma_e_sigma: float
    nbar0: float
    nbar0_sigma: float
    gamma_a: float
    covariance: np.ndarray
    chi2: float
    dof: int
    at_validity_boundary: bool = False


@dataclass(frozen=True)
class SafetyCheck:
    lifetime_ratio: float  # lifetime / delay
    heating_product: float  # lifetime * heating rate
    threshold: float
    passed: bool
    marginal: bool


def _check_validity(gamma_e, t_d):
    x = np.asarray(gamma_e * np.asarray(t_d, float))
    if np.any(np.asarray(t_d) < 0):
        raise IonHeatError("probe delay must be >= 0")
    if np.any(x >= 1):
        raise ModelValidityError(
            f"gamma_e * t_D = {float(np.max(x)):.3g} >= 1; rare-collision model invalid"
        )
    return x


def _out(x):
    x = np.asarray(x, float)
    return float(x) if x.ndim == 0 else x


def nbar_collisions_only(gamma_e: float, t_d):
    """Occupation inferred from collisions alone, ``g t / (1 - g t)``."""
    x = _check_validity(gamma_e, t_d)
    return _out(x / (1 - x))


def sideband_ratio_combined(model: CollisionModel, t_d):
    """Red/blue ratio with collisions and a thermal heating rate ``gamma_a``."""
    x = _check_validity(model.gamma_e, t_d)
    a = model.gamma_a * np.asarray(t_d, float)
    return _out(x + (1 - x) * a / (1 + a))


def nbar_combined(model: CollisionModel, t_d):
    """Measured occupation ``(gamma_e + gamma_a) t / (1 - gamma_e t)``."""
    x = _check_validity(model.gamma_e, t_d)
    t = np.asarray(t_d, float)
    return _out((model.gamma_e + model.gamma_a) * t / (1 - x))


def apparent_linear_rate(model: CollisionModel, delays: Sequence[float]) -> float:
    """Slope of an unweighted straight-line fit to :func:`nbar_combined` over ``delays``."""
    t = np.asarray(delays, float)
    n = nbar_combined(model, t)
    fit = weighted_linear_fit(t, np.atleast_1d(n), np.ones_like(t))
    return float(fit.params[1])


def fit_gamma_e(series: HeatingSeries, gamma_a: float, max_iter: int = 200, xtol: float = 1e-10) -> GammaEFit:
    """Elastic collision rate from an occupation-vs-delay series.

    Fits ``nbar0 + nbar_combined(gamma_e, gamma_a; t)`` with ``gamma_a``
    held fixed. ``gamma_e`` is confined to ``[0, 1/max(t))``; a best fit
    within 1% of the upper edge is flagged.
    """
    if gamma_a < 0:
        raise IonHeatError("gamma_a must be >= 0")
    if len(series.points) < 3:
        raise FitError(f"need at least 3 points, got {len(series.points)}")
    t, n, s = series.arrays()
    t_max = float(t.max())
    if not t_max > 0:
        raise FitError("need at least one positive delay")
    g_hi = (1 - 1e-9) / t_max

    def residuals(x):
        n0, g = x
        return (n0 + (g + gamma_a) * t / (1 - g * t) - n) / s

    def jac(x):
        _, g = x
        d_g = t * (1 + gamma_a * t) / (1 - g * t) ** 2
        return np.column_stack([1 / s, d_g / s])

    naive = weighted_linear_fit(t, n, s)
    g0 = float(np.clip(naive.params[1] - gamma_a, 0.0, 0.5 / t_max))
    res = levenberg_marquardt(
        residuals,
        [naive.params[0], g0],
        jac=jac,
        bounds=([-np.inf, 0.0], [np.inf, g_hi]),
        max_iter=max_iter,
        xtol=xtol,
    )
    n0, g = res.params
    return GammaEFit(
        gamma_e=float(g),
        gamma_e_sigma=float(res.errors[1]),
        nbar0=float(n0),
        nbar0_sigma=float(res.errors[0]),
        gamma_a=float(gamma_a),
        covariance=res.covariance,
        chi2=res.chi2,
        dof=res.dof,
        at_validity_boundary=bool(g * t_max >= 0.99),
    )


def reduced_mass(gas: GasSpecies, ion: IonSpecies, constants: ConstantsTable = CODATA) -> float:
    """Ion-neutral reduced mass in kg."""
    return gas.mass * ion.mass / (gas.mass + ion.mass) * constants.atomic_mass_unit


def relative_speed(gas: GasSpecies, ion: IonSpecies, constants: ConstantsTable = CODATA) -> float:
    """Characteristic relative speed ``sqrt(2 k_B T / mu)`` in m/s."""
    return math.sqrt(2 * constants.boltzmann * gas.temperature / reduced_mass(gas, ion, constants))


def _elastic_rate_per_density(gas, ion, coefficient, constants):
    v = relative_speed(gas, ion, constants)
    alpha = gas.polarizability * CM3_TO_M3
    # per m^-3 of density, returned per cm^-3
    return coefficient * v ** (1 / 3) * alpha ** (2 / 3) * PER_CM3_TO_PER_M3


def elastic_rate(
    density: float,
    gas: GasSpecies,
    ion: IonSpecies,
    coefficient: float = ELASTIC_RATE_COEFFICIENT,
    constants: ConstantsTable = CODATA,
) -> float:
    """Elastic collision rate (s^-1) for a gas density in cm^-3."""
    if density < 0:
        raise IonHeatError("density must be >= 0")
    return density * _elastic_rate_per_density(gas, ion, coefficient, constants)


def density_from_elastic_rate(
    gamma_e: float,
    gas: GasSpecies,
    ion: IonSpecies,
    coefficient: float = ELASTIC_RATE_COEFFICIENT,
    constants: ConstantsTable = CODATA,
) -> float:
    """Gas density (cm^-3) that produces the elastic rate ``gamma_e``."""
    if gamma_e < 0:
        raise IonHeatError("elastic rate must be >= 0")
    return gamma_e / _elastic_rate_per_density(gas, ion, coefficient, constants)


def relative_spread(values: Sequence[float]) -> float:
    """Half the range divided by the mid-range value: all values lie within this fraction of it."""
    v = np.asarray(values, float)
    hi, lo = float(v.max()), float(v.min())
    return (hi - lo) / (hi + lo)


def langevin_rate(
    density: float, gas: GasSpecies, ion: IonSpecies, constants: ConstantsTable = CODATA
) -> float:
    """Langevin capture rate (s^-1), ``n q sqrt(pi alpha / (eps0 mu))``.

    ``alpha`` is the polarizability volume in SI (m^3). An upper bound on the
    rate of inelastic (reactive) collisions.
    """
    if density < 0:
        raise IonHeatError("density must be >= 0")
    q = ion.charge_coulomb(constants)
    alpha = gas.polarizability * CM3_TO_M3
    mu = reduced_mass(gas, ion, constants)
    k = q * math.sqrt(math.pi * alpha / (constants.vacuum_permittivity * mu))
    return density * PER_CM3_TO_PER_M3 * k


def energy_transfer_fraction(gas_mass: float, ion_mass: float) -> float:
    """Maximum fraction ``4 m M / (m + M)**2`` of energy passed in a head-on collision."""
    return 4 * gas_mass * ion_mass / (gas_mass + ion_mass) ** 2


def max_energy_transfer(
    gas: GasSpecies,
    ion: IonSpecies,
    thermal_factor: float = 1.0,
    constants: ConstantsTable = CODATA,
) -> float:
    """Largest kinetic energy (eV) a resting ion gains from one gas molecule.

    The molecule's energy is taken as ``thermal_factor * k_B * T``.
    """
    energy_j = thermal_factor * constants.boltzmann * gas.temperature
    return energy_transfer_fraction(gas.mass, ion.mass) * energy_j / constants.elementary_charge


def collision_safety_check(
    obs: LifetimeObservation, threshold: float = SAFETY_THRESHOLD, margin: float = SAFETY_MARGIN
) -> SafetyCheck:
    """Lifetime rule of thumb for ruling out collision-induced apparent heating.

    Passes when both ``lifetime/delay`` and ``lifetime*heating_rate`` exceed
    ``threshold``; a pass with either ratio below ``threshold*margin`` is
    reported as marginal.
    """
    ratio = obs.lifetime / obs.delay
    product = obs.lifetime * obs.heating_rate
    passed = ratio > threshold and product > threshold
    marginal = passed and min(ratio, product) < threshold * margin
    return SafetyCheck(ratio, product, threshold, passed, marginal)
