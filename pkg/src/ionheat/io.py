"""File formats: sideband-scan CSV and JSON result documents.

Scan files are comma-separated with the exact header line::

    delay_s,sideband,detuning_hz,shots,bright,probe_duration_s

One row per (delay, sideband, detuning). Floats are written with ``repr`` so
that a write/read cycle reproduces every value bit for bit. Files that omit
the trailing ``probe_duration_s`` column are accepted when the probe duration
is supplied separately.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io as _io
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import IonHeatError, SchemaError
from .inference import ScanPoint, SidebandScan

SCAN_HEADER = ("delay_s", "sideband", "detuning_hz", "shots", "bright", "probe_duration_s")
SCAN_HEADER_MINIMAL = SCAN_HEADER[:5]
SERIES_HEADER = ("delay_s", "nbar", "sigma")
POWER_LAW_HEADER = ("temperature_k", "rate", "sigma")
RESULT_SCHEMA_VERSION = 1
_SIDEBAND_ORDER = {"red": 0, "blue": 1}


def format_scans(scans: Iterable[SidebandScan]) -> str:
    """Scan records as CSV text, in the order given."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_HEADER)
    for scan in scans:
        for p in scan.points:
            writer.writerow(
                [repr(float(scan.delay)), scan.which, repr(float(p.detuning)), p.shots, p.bright,
                 repr(float(scan.probe_duration))]
            )
    return buf.getvalue()


def write_scans(scans: Iterable[SidebandScan], path: str | Path) -> None:
    Path(path).write_text(format_scans(scans))


def _parse_float(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"line {line}: {name}={text!r} is not a number") from None
    if not math.isfinite(value):
        raise SchemaError(f"line {line}: {name}={text!r} is not finite")
    return value


def _parse_int(text: str, name: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise SchemaError(f"line {line}: {name}={text!r} is not an integer") from None


def parse_scans(text: str, probe_duration: float | None = None, source: str = "<string>") -> list[SidebandScan]:
    """Parse scan CSV text into :class:`SidebandScan` records.

    Rows are grouped by (delay, sideband, probe duration). Scans are ordered
    by delay, red before blue, and points within a scan by detuning.
    """
    lines = text.splitlines()
    if not lines:
        raise SchemaError(f"{source}: missing header")
    header = tuple(h.strip() for h in next(csv.reader([lines[0]])))
    if header == SCAN_HEADER:
        has_duration = True
    elif header == SCAN_HEADER_MINIMAL:
        has_duration = False
        if probe_duration is None:
            raise SchemaError(f"{source}: no probe_duration_s column and no probe duration given")
    else:
        raise SchemaError(f"{source}: header {','.join(header)!r} does not match {','.join(SCAN_HEADER)!r}")

    groups: dict[tuple, list[ScanPoint]] = {}
    n_cols = len(header)
    for line_no, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != n_cols:
            raise SchemaError(f"{source} line {line_no}: expected {n_cols} fields, got {len(row)}")
        row = [c.strip() for c in row]
        delay = _parse_float(row[0], "delay_s", line_no)
        which = row[1]
        if which not in _SIDEBAND_ORDER:
            raise SchemaError(f"{source} line {line_no}: sideband={which!r} must be red or blue")
        detuning = _parse_float(row[2], "detuning_hz", line_no)
        shots = _parse_int(row[3], "shots", line_no)
        bright = _parse_int(row[4], "bright", line_no)
        tau = _parse_float(row[5], "probe_duration_s", line_no) if has_duration else float(probe_duration)
        if delay < 0:
            raise SchemaError(f"{source} line {line_no}: delay_s must be >= 0")
        if shots < 1:
            raise SchemaError(f"{source} line {line_no}: shots must be >= 1")
        if not 0 <= bright <= shots:
            raise SchemaError(f"{source} line {line_no}: bright={bright} outside [0, shots={shots}]")
        if not tau > 0:
            raise SchemaError(f"{source} line {line_no}: probe_duration_s must be positive")
        groups.setdefault((delay, which, tau), []).append(ScanPoint(detuning, shots, bright))

    if not groups:
        warnings.warn(f"{source}: no scan rows", UserWarning, stacklevel=2)
        return []
    scans = []
    for (delay, which, tau) in sorted(groups, key=lambda k: (k[0], _SIDEBAND_ORDER[k[1]], k[2])):
        pts = sorted(groups[(delay, which, tau)], key=lambda p: p.detuning)
        dets = [p.detuning for p in pts]
        if len(set(dets)) != len(dets):
            raise SchemaError(f"{source}: duplicate detuning in {which} scan at delay {delay!r} s")
        scans.append(SidebandScan(delay=delay, probe_duration=tau, which=which, points=tuple(pts)))
    return scans


def ingest_scans(path: str | Path, probe_duration: float | None = None) -> list[SidebandScan]:
    """Read a scan CSV file; see :func:`parse_scans`."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise IonHeatError(f"{path}: no such file") from None
    return parse_scans(text, probe_duration, source=str(path))


def scans_digest(scans: Iterable[SidebandScan]) -> str:
    """SHA-256 of the canonical CSV form of ``scans``."""
    return hashlib.sha256(format_scans(scans).encode()).hexdigest()


def read_table(path: str | Path, header: tuple[str, ...]) -> np.ndarray:
    """Numeric CSV table with an exact header; returns a 2-D float array."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise IonHeatError(f"{path}: no such file") from None
    if not lines or tuple(h.strip() for h in lines[0].split(",")) != header:
        raise SchemaError(f"{path}: header must be {','.join(header)!r}")
    rows = []
    for line_no, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise SchemaError(f"{path} line {line_no}: expected {len(header)} fields, got {len(row)}")
        rows.append([_parse_float(c.strip(), name, line_no) for c, name in zip(row, header)])
    return np.array(rows, float).reshape(-1, len(header))


# -- result documents -------------------------------------------------------


def quantity(value, unit: str, sigma=None) -> dict:
    """Numeric value tagged with its unit and optional one-sigma uncertainty."""
    q = {"value": value, "unit": unit}
    if sigma is not None:
        q["sigma"] = sigma
    return q


def _normalize(obj):
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        # JSON has no literal for these
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    raise IonHeatError(f"cannot store {type(obj).__name__} in a result document")


def decode_number(x) -> float:
    """Inverse of the non-finite float encoding used in result documents."""
    return float(x)


def utc_timestamp() -> str:
    """ISO-8601 UTC time, or ``SOURCE_DATE_EPOCH`` when that is set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
    else:
        t = _dt.datetime.now(_dt.timezone.utc)
    return t.replace(microsecond=0).isoformat()


@dataclass
class ResultDocument:
    """Structured analysis output.

    ``body`` holds everything that depends on the inputs; ``generated_at``
    is kept apart and ignored by equality so that reruns compare equal.
    """

    body: dict
    generated_at: str = field(default="", compare=False)

    def __post_init__(self):
        self.body = _normalize(self.body)
        self.body.setdefault("schema_version", RESULT_SCHEMA_VERSION)

    def to_json(self, include_timestamp: bool = True) -> str:
        doc = dict(self.body)
        if include_timestamp:
            doc["generated_at"] = self.generated_at
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ResultDocument:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid result document: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("schema_version") != RESULT_SCHEMA_VERSION:
            raise SchemaError("not a result document of a supported schema version")
        generated_at = doc.pop("generated_at", "")
        return cls(doc, generated_at)

    @classmethod
    def load(cls, path: str | Path) -> ResultDocument:
        try:
            return cls.from_json(Path(path).read_text())
        except FileNotFoundError:
            raise IonHeatError(f"{path}: no such file") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())
