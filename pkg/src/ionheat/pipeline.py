"""End-to-end analysis of a set of sideband scans.

Stages run in order: per-scan lineshape fits, occupation per delay, the
heating-rate line fit, field-noise conversion and, when the extra inputs are
given, the collision-rate fit and the lifetime safety check. A failing stage
is recorded with its error category and later stages run if their inputs
survive.
"""
from __future__ import annotations

import math
import warnings
from typing import Sequence


from . import __version__
from .collisions import LifetimeObservation, collision_safety_check, fit_gamma_e
from .config import ConfigDocument
from .errors import IonHeatError, SaturatedRatioError
from .inference import (
    HeatingPoint,
    HeatingSeries,
    ScanFitResult,
    SidebandScan,
    fit_heating_rate,
    fit_scan,
    nbar_from_scans,
)
from .io import ResultDocument, quantity, scans_digest, utc_timestamp
from .noise import rate_to_SE
from .physics import TrapConfig


def _error(exc: Exception) -> dict:
    category = getattr(exc, "category", "internal")
    return {"status": "failed", "error": {"category": category, "message": str(exc)}}


def _scan_fit_entry(scan: SidebandScan, fit: ScanFitResult, shared: bool) -> dict:
    return {
        "status": "ok",
        "delay": quantity(scan.delay, "s"),
        "sideband": scan.which,
        "amplitude": quantity(fit.amplitude, "1", fit.amplitude_sigma),
        "center": quantity(fit.center, "Hz", fit.center_sigma),
        "width": quantity(fit.width, "Hz", fit.width_sigma),
        "reduced_chi2": quantity(fit.goodness, "1"),
        "dof": quantity(fit.dof, "count"),
        "low_signal": fit.low_signal,
        "amplitude_at_bound": fit.amplitude_at_bound,
        "shape_from_blue": shared,
    }


def pair_scans(scans: Sequence[SidebandScan]) -> dict[float, dict[str, SidebandScan]]:
    """Scans keyed by delay, then sideband. Duplicate (delay, sideband) pairs are rejected."""
    table: dict[float, dict[str, SidebandScan]] = {}
    for scan in scans:
        slot = table.setdefault(scan.delay, {})
        if scan.which in slot:
            raise IonHeatError(f"two {scan.which} scans at delay {scan.delay} s")
        slot[scan.which] = scan
    return dict(sorted(table.items()))


def fit_scan_pair(
    red: SidebandScan | None,
    blue: SidebandScan | None,
    axial_frequency: float,
    shared_shape: bool = True,
    reweight: int = 1,
    max_iter: int = 200,
    xtol: float = 1e-10,
):
    """Fit the blue scan, then the red one.

    With ``shared_shape`` the red fit takes its Rabi width from the blue fit
    and its centre at the blue centre less twice the trap frequency, leaving
    only the amplitude free. Returns ``(red_fit, blue_fit, errors)`` where a
    failed fit is None and its exception is stored in ``errors``.
    """
    opts = {"reweight": reweight, "max_iter": max_iter, "xtol": xtol}
    fits: dict[str, ScanFitResult | None] = {"red": None, "blue": None}
    errors: dict[str, Exception] = {}
    if blue is not None:
        try:
            fits["blue"] = fit_scan(blue, **opts)
        except IonHeatError as exc:
            errors["blue"] = exc
    if red is not None:
        kw = dict(opts)
        b = fits["blue"]
        if shared_shape and b is not None and red.probe_duration == blue.probe_duration:
            kw["fixed_width"] = b.width
            kw["fixed_center"] = b.center - 2 * axial_frequency
        try:
            fits["red"] = fit_scan(red, **kw)
        except IonHeatError as exc:
            errors["red"] = exc
    return fits["red"], fits["blue"], errors


def run_pipeline(
    scans: Sequence[SidebandScan],
    trap: TrapConfig,
    config: ConfigDocument | None = None,
    *,
    temperature: float | None = None,
    trap_id: str = "",
    gamma_a: float | None = None,
    lifetime: float | None = None,
    seed: int | None = None,
    extra_provenance: dict | None = None,
) -> ResultDocument:
    """Analyse sideband scans into a :class:`~ionheat.io.ResultDocument`.

    Parameters
    ----------
    scans
        Red and blue scans; at least two delays should carry both sidebands.
    trap
        Trap and ion used to place the red fit and convert the rate to field noise.
    config
        Fit settings, thresholds and constants; the packaged defaults if None.
    temperature
        Electrode temperature (K) recorded for temperature reports;
        defaults to ``trap.electrode_temperature``.
    gamma_a
        If given, the occupations are also fitted for the elastic collision
        rate with this anomalous heating rate held fixed.
    lifetime
        Observed ion lifetime (s); enables the collision safety check.
    seed
        Recorded in the provenance block only.
    """
    config = config or ConfigDocument.from_mapping()
    constants = config.constants()
    fit_cfg = config["fit"]
    shared = fit_cfg["red_shape"] == "shared"
    if fit_cfg["red_shape"] not in ("shared", "free"):
        raise IonHeatError(f"fit.red_shape must be 'shared' or 'free', got {fit_cfg['red_shape']!r}")
    scans = list(scans)
    notes: list[str] = []
    stages: dict = {}

    # per-delay scan fits
    table = pair_scans(scans)
    complete = [t for t, s in table.items() if "red" in s and "blue" in s]
    if len(complete) < 2:
        notes.append(f"only {len(complete)} delay(s) carry both sidebands; at least 2 are needed")
    scan_entries = []
    pairs: dict[float, tuple] = {}
    for delay, slot in table.items():
        red, blue = slot.get("red"), slot.get("blue")
        r_fit, b_fit, errs = fit_scan_pair(
            red, blue, trap.axial_frequency, shared, fit_cfg["reweight"], fit_cfg["max_iter"], fit_cfg["xtol"]
        )
        for which, scan, fit in (("blue", blue, b_fit), ("red", red, r_fit)):
            if scan is None:
                continue
            if fit is None:
                entry = {"delay": quantity(delay, "s"), "sideband": which, **_error(errs[which])}
            else:
                entry = _scan_fit_entry(scan, fit, shared and which == "red" and b_fit is not None)
            scan_entries.append(entry)
        pairs[delay] = (r_fit, b_fit)
    stages["scan_fits"] = scan_entries

    # occupation per delay
    nbar_entries = []
    heating_points = []
    for delay, (r_fit, b_fit) in pairs.items():
        entry = {"delay": quantity(delay, "s")}
        if r_fit is None or b_fit is None:
            entry.update(status="skipped", reason="missing sideband fit")
        else:
            try:
                n, s = nbar_from_scans(r_fit, b_fit)
                entry.update(
                    status="ok",
                    ratio=quantity(r_fit.amplitude / b_fit.amplitude, "1"),
                    nbar=quantity(n, "quanta", s),
                )
                if s > 0 and math.isfinite(s):
                    heating_points.append(HeatingPoint(delay, n, s))
                else:
                    entry.update(status="excluded", reason="occupation uncertainty is not positive")
            except SaturatedRatioError as exc:
                entry.update(_error(exc))
                entry.update(status="excluded", reason="saturated-ratio")
                notes.append(
                    f"delay {delay!r} s: red/blue ratio >= 1; possible collision contamination"
                )
            except IonHeatError as exc:
                entry.update(_error(exc))
        nbar_entries.append(entry)
    stages["nbar"] = nbar_entries

    # heating rate
    series = HeatingSeries(tuple(heating_points), temperature, trap_id)
    rate = None
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            hr = fit_heating_rate(series)
        rate = hr
        stages["heating_rate"] = {
            "status": "ok",
            "rate": quantity(hr.rate, "quanta/s", hr.rate_sigma),
            "intercept": quantity(hr.intercept, "quanta", hr.intercept_sigma),
            "covariance": quantity(hr.covariance, "[quanta^2/s^2, quanta^2/s; quanta^2/s, quanta^2]"),
            "chi2": quantity(hr.chi2, "1"),
            "dof": quantity(hr.dof, "count"),
            "n_points": quantity(len(heating_points), "count"),
            "warnings": [str(w.message) for w in caught],
        }
    except IonHeatError as exc:
        stages["heating_rate"] = _error(exc)

    # field noise
    if rate is None:
        stages["field_noise"] = {"status": "skipped", "reason": "no heating rate"}
    else:
        try:
            per_rate = rate_to_SE(1.0, trap, constants)
            se = rate_to_SE(rate.rate, trap, constants)
            se_sigma = per_rate * rate.rate_sigma
            omega = trap.angular_frequency
            stages["field_noise"] = {
                "status": "ok",
                "spectral_density": quantity(se, "V^2/m^2/Hz", se_sigma),
                "omega_spectral_density": quantity(omega * se, "V^2/m^2", omega * se_sigma),
            }
        except IonHeatError as exc:
            stages["field_noise"] = _error(exc)

    # collisions
    if gamma_a is None:
        stages["collisions"] = {"status": "skipped", "reason": "no anomalous heating rate supplied"}
    else:
        try:
            g = fit_gamma_e(series, gamma_a, fit_cfg["max_iter"], fit_cfg["xtol"])
            stages["collisions"] = {
                "status": "ok",
                "gamma_e": quantity(g.gamma_e, "1/s", g.gamma_e_sigma),
                "nbar0": quantity(g.nbar0, "quanta", g.nbar0_sigma),
                "gamma_a": quantity(g.gamma_a, "quanta/s"),
                "chi2": quantity(g.chi2, "1"),
                "dof": quantity(g.dof, "count"),
                "at_validity_boundary": g.at_validity_boundary,
            }
        except IonHeatError as exc:
            stages["collisions"] = _error(exc)

    # safety check
    if lifetime is None:
        stages["safety"] = {"status": "skipped", "reason": "no lifetime supplied"}
    elif rate is None:
        stages["safety"] = {"status": "skipped", "reason": "no heating rate"}
    else:
        try:
            delays = [p.delay for p in heating_points]
            obs = LifetimeObservation(lifetime, max(delays), rate.rate)
            th = config["thresholds"]
            chk = collision_safety_check(obs, th["collision_safety"], th["marginal_factor"])
            stages["safety"] = {
                "status": "ok",
                "lifetime": quantity(lifetime, "s"),
                "lifetime_over_delay": quantity(chk.lifetime_ratio, "1"),
                "lifetime_times_rate": quantity(chk.heating_product, "quanta"),
                "threshold": quantity(chk.threshold, "1"),
                "passed": chk.passed,
                "marginal": chk.marginal,
            }
        except (IonHeatError, ValueError) as exc:
            stages["safety"] = _error(exc)

    if temperature is None:
        temperature = trap.electrode_temperature
    provenance = {
        "tool": "ionheat",
        "tool_version": __version__,
        "seed": seed,
        "config_digest": config.digest(),
        "inputs_digest": scans_digest(scans),
    }
    if extra_provenance:
        provenance.update(extra_provenance)
    body = {
        "kind": "heating-analysis",
        "provenance": provenance,
        "trap": {
            "trap_id": trap_id,
            "ion": trap.species.name,
            "axial_frequency": quantity(trap.axial_frequency, "Hz"),
            "angular_frequency": quantity(trap.angular_frequency, "rad/s"),
            "ion_electrode_distance": quantity(trap.ion_electrode_distance, "m"),
            "electrode_temperature": quantity(float(temperature), "K"),
        },
        "stages": stages,
        "notes": notes,
    }
    return ResultDocument(body, utc_timestamp())
