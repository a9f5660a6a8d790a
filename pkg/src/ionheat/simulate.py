"""Seeded synthetic sideband-scan experiments.

Every (delay, sideband, detuning) point draws from its own Philox stream keyed
by the master seed and the point's indices, so the dataset does not depend on
the order in which points are evaluated. Within a point, shot ``i`` consumes
the ``i``-th pair of uniforms of that stream: one for the collision draw, one
for the detection outcome.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CODATA, ConstantsTable
from .errors import IonHeatError, ModelValidityError
from .inference import ScanPoint, SidebandScan
from .physics import ThermalState, TrapConfig, lamb_dicke, sideband_excitation

SIDEBANDS = ("red", "blue")
COLLISION_LAWS = ("linear", "poisson")


@dataclass(frozen=True)
class TruthParams:
    heating_rate: float  # quanta/s
    nbar0: float = 0.0
    gamma_e: float = 0.0  # elastic collisions per second
    probe_rabi: float = 2 * math.pi * 163e3  # carrier Rabi angular frequency, rad/s
    probe_duration: float = 35e-6  # s

    def __post_init__(self):
        for name in ("heating_rate", "nbar0", "gamma_e"):
            if not getattr(self, name) >= 0:
                raise IonHeatError(f"{name} must be >= 0")
        if not self.probe_rabi > 0 or not self.probe_duration > 0:
            raise IonHeatError("probe Rabi frequency and duration must be positive")


@dataclass(frozen=True)
class Schedule:
    delays: tuple[float, ...]
    detunings: tuple[float, ...]  # Hz, offsets from each sideband resonance
    shots: int = 300
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "delays", tuple(float(t) for t in self.delays))
        object.__setattr__(self, "detunings", tuple(float(d) for d in self.detunings))
        if self.shots < 1:
            raise IonHeatError("shots must be >= 1")
        if any(t < 0 for t in self.delays):
            raise IonHeatError("delays must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise IonHeatError("seed must be a 64-bit unsigned integer")


def point_rng(seed: int, delay_index: int, sideband_index: int, detuning_index: int):
    ss = np.random.SeedSequence(seed, spawn_key=(delay_index, sideband_index, detuning_index))
    return np.random.Generator(np.random.Philox(ss))


def collision_probability(gamma_e: float, delay: float, law: str = "linear") -> float:
    """Fraction of experiments that suffer a collision during ``delay``.

    ``"linear"`` is the single-collision fraction ``gamma_e * delay`` on which
    the rare-collision occupation formulas rest; ``"poisson"`` is the
    probability of at least one collision, ``1 - exp(-gamma_e * delay)``.
    """
    if law == "linear":
        return gamma_e * delay
    if law == "poisson":
        return -math.expm1(-gamma_e * delay)
    raise IonHeatError(f"unknown collision law {law!r}")


def simulate_point(
    rng: np.random.Generator, shots: int, p_cold: float, p_collision: float, p_hot: float
) -> tuple[int, int]:
    """Draw ``shots`` experiments; return (bright count, collision count)."""
    u = rng.random((shots, 2))
    collided = u[:, 0] < p_collision
    p = np.where(collided, p_hot, p_cold)
    return int(np.count_nonzero(u[:, 1] < p)), int(np.count_nonzero(collided))


def simulate_dataset(
    trap: TrapConfig,
    truth: TruthParams,
    sched: Schedule,
    p_sat: float | None = None,
    collision_law: str = "linear",
    constants: ConstantsTable = CODATA,
) -> list[SidebandScan]:
    """Red and blue scans at every delay of ``sched``.

    Detunings in the returned scans are relative to the carrier: the schedule
    offsets are placed around ``-f`` (red) and ``+f`` (blue). A shot without a
    collision is detected with the thermal sideband excitation probability at
    ``nbar0 + heating_rate * delay``. A collided ion shows equal red and blue
    excitation: the cold blue-sideband probability at that detuning when
    ``p_sat`` is None, otherwise the flat probability ``p_sat``. Collisions
    occur with :func:`collision_probability` under ``collision_law``.
    """
    if p_sat is not None and not 0 <= p_sat <= 1:
        raise IonHeatError("p_sat must lie in [0, 1]")
    if collision_law not in COLLISION_LAWS:
        raise IonHeatError(f"unknown collision law {collision_law!r}")
    if sched.delays and truth.gamma_e * max(sched.delays) >= 1:
        raise ModelValidityError(
            f"gamma_e * max(delay) = {truth.gamma_e * max(sched.delays):.3g} >= 1; "
            "the rare-collision model does not apply"
        )
    eta = lamb_dicke(trap, constants)
    offsets = np.array(sched.detunings, float)
    scans = []
    for i_delay, delay in enumerate(sched.delays):
        state = ThermalState(truth.nbar0 + truth.heating_rate * delay)
        p_coll = collision_probability(truth.gamma_e, delay, collision_law)
        for i_sb, which in enumerate(SIDEBANDS):
            p_cold = sideband_excitation(
                state, eta, truth.probe_rabi, truth.probe_duration, 2 * math.pi * offsets, which
            )
            if p_sat is None:
                p_hot = sideband_excitation(
                    state, eta, truth.probe_rabi, truth.probe_duration, 2 * math.pi * offsets, "blue"
                )
            else:
                p_hot = np.full(offsets.shape, float(p_sat))
            sign = -1.0 if which == "red" else 1.0
            points = []
            collisions = []
            for i_det, offset in enumerate(offsets):
                rng = point_rng(sched.seed, i_delay, i_sb, i_det)
                k, c = simulate_point(
                    rng, sched.shots, float(p_cold[i_det]), p_coll, float(p_hot[i_det])
                )
                points.append(ScanPoint(sign * trap.axial_frequency + float(offset), sched.shots, k))
                collisions.append(c)
            scans.append(
                SidebandScan(
                    delay=delay,
                    probe_duration=truth.probe_duration,
                    which=which,
                    points=tuple(points),
                    metadata={"collisions": tuple(collisions)},
                )
            )
    return scans


def simulate_lifetime(gamma_i: float, n_experiments: int, seed: int) -> np.ndarray:
    """Exponential ion survival times (s) for a loss rate ``gamma_i``."""
    if not gamma_i > 0:
        raise IonHeatError("loss rate must be positive")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return rng.exponential(1.0 / gamma_i, size=int(n_experiments))


def detuning_grid(span: float, n_points: int = 21) -> tuple[float, ...]:
    """Evenly spaced offsets covering ``[-span/2, span/2]`` Hz."""
    return tuple(float(x) for x in np.linspace(-span / 2, span / 2, n_points))
