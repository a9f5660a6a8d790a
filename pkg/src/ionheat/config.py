"""Configuration documents.

A configuration is a JSON object of named sections, each a flat mapping of
keys to values. User files are merged section by section over the packaged
defaults (``data/defaults.json``); keys the defaults do not define are
rejected, except that new entries may be added to the ``ions`` and ``gases``
tables as long as each entry uses the same keys as the shipped ones.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .collisions import GasSpecies
from .constants import CODATA, ConstantsTable
from .errors import SchemaError
from .noise import GeometryFactor
from .physics import IonSpecies, TrapConfig
from .simulate import Schedule, TruthParams, detuning_grid

SPECIES_TABLES = ("ions", "gases")


def _load_defaults() -> dict:
    text = resources.files("ionheat").joinpath("data/defaults.json").read_text()
    return json.loads(text)


DEFAULTS = _load_defaults()


def _merge(base: dict, override: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if where == "" and key == "schema_version":
            if value != base["schema_version"]:
                raise SchemaError(f"unsupported config schema_version {value!r}")
            continue
        path = f"{where}.{key}" if where else key
        if where in SPECIES_TABLES:
            template = next(iter(base.values()))
            if not isinstance(value, dict):
                raise SchemaError(f"{path} must be an object")
            unknown = set(value) - set(template)
            missing = set(template) - set(value) - {"source"}
            if unknown or (key not in base and missing):
                raise SchemaError(
                    f"{path}: unknown keys {sorted(unknown)} / missing keys {sorted(missing)}"
                )
            out[key] = {**base.get(key, {}), **value}
            continue
        if where == "constants":
            if key not in CODATA.__dataclass_fields__:
                raise SchemaError(f"unknown config key {path!r}")
            out[key] = value
            continue
        if key not in base:
            raise SchemaError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise SchemaError(f"{path} must be an object")
            out[key] = _merge(base[key], value, path)
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class ConfigDocument:
    data: dict

    @classmethod
    def from_mapping(cls, mapping: dict | None = None) -> ConfigDocument:
        return cls(_merge(DEFAULTS, mapping or {}, ""))

    @classmethod
    def load(cls, path: str | Path | None = None) -> ConfigDocument:
        if path is None:
            return cls.from_mapping({})
        try:
            mapping = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(mapping, dict):
            raise SchemaError(f"{path}: top level must be an object")
        return cls.from_mapping(mapping)

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def constants(self) -> ConstantsTable:
        try:
            return CODATA.with_overrides(self.data["constants"])
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"constants: {exc}") from None

    def ion(self, name: str | None = None) -> IonSpecies:
        name = name or self.data["trap"]["ion"]
        try:
            entry = self.data["ions"][name]
        except KeyError:
            raise SchemaError(f"ion species {name!r} not in config") from None
        return IonSpecies(name, entry["mass_amu"], entry["charge"], entry["probe_wavelength_m"])

    def gas(self, name: str, temperature: float | None = None) -> GasSpecies:
        try:
            entry = self.data["gases"][name]
        except KeyError:
            raise SchemaError(f"gas species {name!r} not in config") from None
        if temperature is None:
            temperature = self.data["collisions"]["gas_temperature_k"]
        return GasSpecies(name, entry["mass_amu"], entry["polarizability_cm3"], temperature)

    def trap(self, **overrides) -> TrapConfig:
        t = {**self.data["trap"], **{k: v for k, v in overrides.items() if v is not None}}
        return TrapConfig(
            species=self.ion(t["ion"]),
            axial_frequency=t["axial_frequency_hz"],
            ion_electrode_distance=t["ion_electrode_distance_m"],
            electrode_temperature=t["electrode_temperature_k"],
            beam_projection=t["beam_projection"],
            lamb_dicke=t["lamb_dicke"],
        )

    def geometry(self) -> GeometryFactor:
        return GeometryFactor(self.data["geometry"]["effective_distance_m"])

    def truth(self) -> TruthParams:
        s = self.data["simulation"]
        return TruthParams(
            heating_rate=s["heating_rate"],
            nbar0=s["nbar0"],
            gamma_e=s["gamma_e"],
            probe_rabi=2 * math.pi * s["probe_rabi_hz"],
            probe_duration=s["probe_duration_s"],
        )

    def schedule(self, seed: int = 0) -> Schedule:
        s = self.data["simulation"]
        return Schedule(
            delays=tuple(s["delays_s"]),
            detunings=detuning_grid(s["detuning_span_hz"], s["detuning_points"]),
            shots=s["shots"],
            seed=seed,
        )
