"""Forward model of sideband thermometry.

Species and trap descriptions, thermal occupation statistics, the Lamb-Dicke
parameter and first-order sideband excitation lineshapes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .constants import CODATA, ConstantsTable
from .errors import CutoffError, IonHeatError, SaturatedRatioError

Sideband = Literal["red", "blue"]

#: Truncated thermal tail probability tolerated by the Fock-space sums.
TAIL_TOLERANCE = 1e-9
MIN_FOCK_CUTOFF = 30


@dataclass(frozen=True)
class IonSpecies:
    """Trapped ion species.

    ``mass`` is in atomic mass units, ``charge`` in elementary charges and
    ``probe_wavelength`` (the sideband probe laser) in meters.
    """

    name: str
    mass: float
    charge: int = 1
    probe_wavelength: float = 674e-9

    def __post_init__(self):
        if not self.mass > 0:
            raise IonHeatError(f"ion mass must be positive, got {self.mass}")
        if int(self.charge) != self.charge or self.charge < 1:
            raise IonHeatError(f"ion charge must be a positive integer, got {self.charge}")
        if not self.probe_wavelength > 0:
            raise IonHeatError("probe wavelength must be positive")

    def mass_kg(self, constants: ConstantsTable = CODATA) -> float:
        return self.mass * constants.atomic_mass_unit

    def charge_coulomb(self, constants: ConstantsTable = CODATA) -> float:
        return self.charge * constants.elementary_charge


@dataclass(frozen=True)
class TrapConfig:
    species: IonSpecies
    axial_frequency: float  # Hz
    ion_electrode_distance: float = 50e-6  # m
    electrode_temperature: float = 295.0  # K
    beam_projection: float = 1.0
    lamb_dicke: float | None = None

    def __post_init__(self):
        if not self.axial_frequency > 0:
            raise IonHeatError("axial frequency must be positive")
        if not self.ion_electrode_distance > 0:
            raise IonHeatError("ion-electrode distance must be positive")
        if not 0 <= self.beam_projection <= 1:
            raise IonHeatError("beam projection must lie in [0, 1]")
        if self.lamb_dicke is not None and not 0 < self.lamb_dicke < 1:
            raise IonHeatError("Lamb-Dicke parameter must lie in (0, 1)")

    @property
    def angular_frequency(self) -> float:
        return 2 * math.pi * self.axial_frequency


@dataclass(frozen=True)
class ThermalState:
    nbar: float

    def __post_init__(self):
        if not self.nbar >= 0 or not math.isfinite(self.nbar):
            raise IonHeatError(f"mean occupation must be finite and >= 0, got {self.nbar}")

    @property
    def boltzmann_ratio(self) -> float:
        """p(n+1)/p(n) for the geometric distribution, equal to nbar/(nbar+1)."""
        return self.nbar / (self.nbar + 1.0)


def thermal_pn(state: ThermalState, n):
    """Occupation probability nbar**n / (nbar+1)**(n+1) of Fock state ``n``.

    ``n`` may be an integer or an integer array.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise IonHeatError("Fock index must be >= 0")
    nbar = state.nbar
    if nbar == 0:
        out = (n_arr == 0).astype(float)
    else:
        # log form keeps large n finite
        out = np.exp(n_arr * math.log(nbar) - (n_arr + 1) * math.log1p(nbar))
    return float(out) if out.ndim == 0 else out


def thermal_tail(state: ThermalState, n_max: int) -> float:
    """Probability of occupying any Fock state above ``n_max``."""
    return state.boltzmann_ratio ** (n_max + 1)


def fock_cutoff(state: ThermalState, tail: float = TAIL_TOLERANCE) -> int:
    """Smallest cutoff (at least ``MIN_FOCK_CUTOFF``) whose thermal tail is below ``tail``."""
    q = state.boltzmann_ratio
    if q == 0:
        return MIN_FOCK_CUTOFF
    n = max(0, math.ceil(math.log(tail) / math.log(q)) - 1)
    while q ** (n + 1) >= tail:
        n += 1
    return max(MIN_FOCK_CUTOFF, n)


def lamb_dicke(trap: TrapConfig, constants: ConstantsTable = CODATA) -> float:
    """Lamb-Dicke parameter of the probe beam along the axial mode.

    Uses the configured value when the trap carries one, otherwise
    ``k cos(theta) sqrt(hbar / (2 m omega))``.
    """
    if trap.lamb_dicke is not None:
        return trap.lamb_dicke
    k = 2 * math.pi / trap.species.probe_wavelength
    x0 = math.sqrt(constants.hbar / (2 * trap.species.mass_kg(constants) * trap.angular_frequency))
    return k * trap.beam_projection * x0


def sideband_excitation(
    state: ThermalState,
    eta: float,
    carrier_rabi: float,
    duration,
    detuning,
    which: Sideband,
    n_max: int | None = None,
):
    """Excitation probability of a thermal ion driven on a motional sideband.

    Parameters
    ----------
    state : ThermalState
        Motional state before the probe pulse.
    eta : float
        Lamb-Dicke parameter, ``0 <= eta < 1``.
    carrier_rabi : float
        Carrier Rabi angular frequency (rad/s).
    duration, detuning : float or array_like
        Probe pulse length (s) and detuning from the sideband resonance
        (rad/s). Broadcast against each other.
    which : {"red", "blue"}
    n_max : int, optional
        Fock cutoff. Defaults to :func:`fock_cutoff`; an explicit value whose
        thermal tail exceeds ``TAIL_TOLERANCE`` raises :class:`CutoffError`.

    Returns
    -------
    float or ndarray
        Probability in [0, 1], summed over the thermal distribution with
        first-order couplings ``eta*Omega0*sqrt(n)`` (red) and
        ``eta*Omega0*sqrt(n+1)`` (blue).
    """
    if not 0 <= eta < 1:
        raise IonHeatError(f"Lamb-Dicke parameter must lie in [0, 1), got {eta}")
    if which not in ("red", "blue"):
        raise IonHeatError(f"sideband must be 'red' or 'blue', got {which!r}")
    t, delta = np.broadcast_arrays(np.asarray(duration, float), np.asarray(detuning, float))
    if np.any(t < 0):
        raise IonHeatError("probe duration must be >= 0")

    if n_max is None:
        n_max = fock_cutoff(state)
    elif thermal_tail(state, n_max) >= TAIL_TOLERANCE:
        raise CutoffError(
            f"Fock cutoff {n_max} leaves thermal tail {thermal_tail(state, n_max):.3g} "
            f"for nbar={state.nbar}; need tail < {TAIL_TOLERANCE}"
        )
    n = np.arange(n_max + 1)
    pn = thermal_pn(state, n)
    coupling = np.sqrt(n) if which == "red" else np.sqrt(n + 1.0)
    omega_n = (eta * carrier_rabi * coupling).reshape((-1,) + (1,) * t.ndim)

    omega_eff2 = omega_n**2 + delta**2
    omega_eff = np.sqrt(omega_eff2)
    with np.errstate(invalid="ignore", divide="ignore"):
        weight = np.where(omega_eff2 > 0, omega_n**2 / omega_eff2, 0.0)
    terms = weight * np.sin(omega_eff * t / 2) ** 2
    p = np.tensordot(pn, terms, axes=(0, 0))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def ratio_from_nbar(nbar: float) -> float:
    if nbar < 0:
        raise IonHeatError("mean occupation must be >= 0")
    return nbar / (nbar + 1.0)


def nbar_from_ratio(r: float) -> ThermalState:
    """Mean occupation ``r / (1 - r)`` from a red/blue sideband ratio.

    Raises :class:`SaturatedRatioError` for ``r >= 1``.
    """
    if not r >= 0:
        raise IonHeatError(f"sideband ratio must be >= 0, got {r}")
    if r >= 1:
        raise SaturatedRatioError(
            f"sideband ratio {r:.4g} >= 1 has no thermal interpretation; "
            "check for collision-dominated or non-thermal data"
        )
    return ThermalState(r / (1.0 - r))
