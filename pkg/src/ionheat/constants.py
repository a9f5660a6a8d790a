"""Physical constants table (SI, CODATA via :mod:`scipy.constants`)."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

from scipy import constants as _sc


@dataclass(frozen=True)
class ConstantsTable:
    hbar: float = _sc.hbar
    boltzmann: float = _sc.k
    elementary_charge: float = _sc.e
    vacuum_permittivity: float = _sc.epsilon_0
    atomic_mass_unit: float = _sc.physical_constants["atomic mass constant"][0]

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"constant {f.name} must be strictly positive")

    def with_overrides(self, overrides: dict | None) -> ConstantsTable:
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown constants: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


CODATA = ConstantsTable()

# Convenience conversions; these are unit definitions, not physics inputs.
CM3_TO_M3 = 1e-6
PER_CM3_TO_PER_M3 = 1e6
