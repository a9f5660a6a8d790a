"""``ionheat`` command-line interface.

Every subcommand reads the configuration given by ``--config`` (packaged
defaults otherwise). Results go to ``--out`` or standard output, as JSON or
CSV according to ``--format``. Failures print a JSON object
``{"error": {"category": ..., "message": ...}}`` on standard error and exit
with a code that identifies the category (see ``EXIT_CODES``).
"""
from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import sys
from functools import wraps
from pathlib import Path

import click

from . import __version__
from . import collisions as col
from . import noise
from .config import ConfigDocument
from .errors import FitError, IonHeatError
from .inference import HeatingSeries, fit_power_law, fit_scan
from .io import (
    POWER_LAW_HEADER,
    SERIES_HEADER,
    ResultDocument,
    format_scans,
    ingest_scans,
    read_table,
)
from .pipeline import fit_scan_pair, pair_scans, run_pipeline
from .report import MODES, build_report, write_report
from .simulate import COLLISION_LAWS, simulate_dataset

EXIT_CODES = {
    "invalid-input": 3,
    "schema": 4,
    "model-validity": 5,
    "saturated-ratio": 5,
    "fock-cutoff": 5,
    "fit-failure": 6,
    "non-convergence": 6,
    "rank-deficient": 6,
    "io": 7,
}


def _fail(category: str, message: str, diagnostics=None):
    err = {"category": category, "message": message}
    if diagnostics:
        err["diagnostics"] = diagnostics
    click.echo(json.dumps({"error": err}, sort_keys=True, default=str), err=True)
    sys.exit(EXIT_CODES[category])


def handle_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except IonHeatError as exc:
            diag = getattr(exc, "diagnostics", None) if isinstance(exc, FitError) else None
            _fail(exc.category, str(exc), diag)
        except KeyError as exc:
            _fail("invalid-input", f"unknown key {exc}")
        except OSError as exc:
            _fail("io", str(exc))

    return wrapper


def _emit(text: str, out: str | None):
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _format_record(record: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(record, sort_keys=True, indent=2) + "\n"
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(record))
    w.writerow([repr(v) if isinstance(v, float) else v for v in record.values()])
    return buf.getvalue()


def _format_rows(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, sort_keys=True, indent=2) + "\n"
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        w.writerow(list(rows[0]))
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.values()])
    return buf.getvalue()


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                             help="JSON configuration merged over the packaged defaults.")
out_option = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")
format_option = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
probe_option = click.option("--probe-duration", type=float, default=None,
                            help="Probe pulse length (s) for scan files without a probe_duration_s column.")
seed_option = click.option("--seed", type=int, default=0, show_default=True, help="Master RNG seed.")


def _config(path) -> ConfigDocument:
    return ConfigDocument.load(path)


@click.group()
@click.version_option(__version__, prog_name="ionheat")
def main():
    """Heating-rate analysis for trapped-ion sideband thermometry."""


# -- simulate ---------------------------------------------------------------


@main.command()
@config_option
@seed_option
@out_option
@click.option("--heating-rate", type=float, default=None, help="Override true heating rate (quanta/s).")
@click.option("--nbar0", type=float, default=None, help="Override initial occupation.")
@click.option("--gamma-e", type=float, default=None, help="Override elastic collision rate (1/s).")
@click.option("--shots", type=int, default=None, help="Override shots per point.")
@click.option("--collision-law", type=click.Choice(COLLISION_LAWS), default=None)
@handle_errors
def simulate(config_path, seed, out, heating_rate, nbar0, gamma_e, shots, collision_law):
    """Write a synthetic sideband-scan CSV."""
    cfg = _config(config_path)
    truth = cfg.truth()
    changes = {k: v for k, v in (("heating_rate", heating_rate), ("nbar0", nbar0), ("gamma_e", gamma_e)) if v is not None}
    truth = dataclasses.replace(truth, **changes)
    sched = cfg.schedule(seed)
    if shots is not None:
        sched = dataclasses.replace(sched, shots=shots)
    sim = cfg["simulation"]
    scans = simulate_dataset(
        cfg.trap(), truth, sched, p_sat=sim["p_sat"],
        collision_law=collision_law or sim["collision_law"], constants=cfg.constants(),
    )
    _emit(format_scans(scans), out)


# -- fitting ----------------------------------------------------------------


@main.command("fit-scan")
@click.argument("scans_csv", type=click.Path(dir_okay=False))
@config_option
@out_option
@format_option
@probe_option
@click.option("--independent", is_flag=True, help="Fit every scan on its own instead of sharing the blue shape.")
@handle_errors
def fit_scan_cmd(scans_csv, config_path, out, fmt, probe_duration, independent):
    """Fit the Rabi lineshape of every scan in SCANS_CSV."""
    cfg = _config(config_path)
    fit_cfg = cfg["fit"]
    trap = cfg.trap()
    shared = fit_cfg["red_shape"] == "shared" and not independent
    rows = []
    for delay, slot in pair_scans(ingest_scans(scans_csv, probe_duration)).items():
        if shared:
            r_fit, b_fit, errs = fit_scan_pair(slot.get("red"), slot.get("blue"), trap.axial_frequency, True,
                                               fit_cfg["reweight"], fit_cfg["max_iter"], fit_cfg["xtol"])
            if errs:
                raise next(iter(errs.values()))
            fits = {"red": r_fit, "blue": b_fit}
        else:
            fits = {w: fit_scan(s, fit_cfg["reweight"], max_iter=fit_cfg["max_iter"], xtol=fit_cfg["xtol"])
                    for w, s in slot.items()}
        for which in ("red", "blue"):
            f = fits.get(which)
            if f is None:
                continue
            rows.append({
                "delay_s": delay, "sideband": which,
                "amplitude": f.amplitude, "amplitude_sigma": f.amplitude_sigma,
                "center_hz": f.center, "center_sigma_hz": f.center_sigma,
                "width_hz": f.width, "width_sigma_hz": f.width_sigma,
                "reduced_chi2": f.goodness, "low_signal": f.low_signal,
            })
    _emit(_format_rows(rows, fmt), out)


@main.command("heating-rate")
@click.argument("scans_csv", type=click.Path(dir_okay=False))
@config_option
@seed_option
@out_option
@format_option
@probe_option
@click.option("--temperature", type=float, default=None, help="Electrode temperature (K) to record.")
@click.option("--distance", type=float, default=None, help="Ion-electrode distance (m); config value by default.")
@click.option("--trap-id", default="", help="Label stored in the document.")
@click.option("--gamma-a", type=float, default=None, help="Also fit the elastic collision rate with this rate fixed.")
@click.option("--lifetime", type=float, default=None, help="Ion lifetime (s) for the collision safety check.")
@handle_errors
def heating_rate_cmd(scans_csv, config_path, seed, out, fmt, probe_duration, temperature, distance, trap_id, gamma_a, lifetime):
    """Run the full analysis on SCANS_CSV and emit a result document.

    With --format csv only the occupation-vs-delay table is written.
    """
    cfg = _config(config_path)
    scans = ingest_scans(scans_csv, probe_duration)
    trap = cfg.trap(electrode_temperature_k=temperature, ion_electrode_distance_m=distance)
    doc = run_pipeline(scans, trap, cfg, temperature=temperature, trap_id=trap_id,
                       gamma_a=gamma_a, lifetime=lifetime, seed=seed)
    if fmt == "json":
        _emit(doc.to_json(), out)
        return
    rows = [
        {"delay_s": e["delay"]["value"], "nbar": e["nbar"]["value"], "sigma": e["nbar"]["sigma"]}
        for e in doc.body["stages"]["nbar"] if e.get("status") == "ok"
    ]
    _emit(_format_rows(rows, "csv"), out)


@main.command("power-law")
@click.argument("points_csv", type=click.Path(dir_okay=False))
@config_option
@out_option
@format_option
@click.option("--breakpoint", type=float, default=None, help="Segment boundary (K); config value by default.")
@handle_errors
def power_law_cmd(points_csv, config_path, out, fmt, breakpoint):
    """Segmented power-law fit of rate vs temperature (temperature_k,rate,sigma)."""
    cfg = _config(config_path)
    bp = cfg["power_law"]["breakpoint_k"] if breakpoint is None else breakpoint
    res = fit_power_law(read_table(points_csv, POWER_LAW_HEADER), bp)
    rows = [
        {"t_min_k": s.t_min, "t_max_k": s.t_max, "exponent": s.exponent, "exponent_sigma": s.exponent_sigma,
         "prefactor": s.prefactor, "log_prefactor_sigma": s.log_prefactor_sigma, "n_points": s.n_points,
         "chi2": s.chi2}
        for s in res.segments
    ]
    _emit(_format_rows(rows, fmt), out)


# -- noise ------------------------------------------------------------------


@main.group("noise")
def noise_group():
    """Field-noise conversions."""


@noise_group.command("convert")
@config_option
@out_option
@format_option
@click.option("--rate", type=float, default=None, help="Heating rate (quanta/s) to convert to S_E.")
@click.option("--se", type=float, default=None, help="S_E (V^2/m^2/Hz) to convert to a heating rate.")
@handle_errors
def noise_convert(config_path, out, fmt, rate, se):
    """Convert between heating rate and field-noise spectral density."""
    if (rate is None) == (se is None):
        raise IonHeatError("give exactly one of --rate and --se")
    cfg = _config(config_path)
    trap, k = cfg.trap(), cfg.constants()
    if rate is None:
        rate = noise.SE_to_rate(se, trap, k)
    else:
        se = noise.rate_to_SE(rate, trap, k)
    rec = {"rate_quanta_per_s": rate, "se_v2_per_m2_hz": se,
           "omega_se_v2_per_m2": trap.angular_frequency * se, "axial_frequency_hz": trap.axial_frequency}
    _emit(_format_record(rec, fmt), out)


@noise_group.command("johnson")
@config_option
@out_option
@format_option
@click.option("--resistance", type=float, default=None, help="Resistance (ohm); config value by default.")
@click.option("--temperature", type=float, required=True, help="Resistor temperature (K).")
@handle_errors
def noise_johnson(config_path, out, fmt, resistance, temperature):
    """Johnson field noise of a resistor seen through the configured geometry."""
    cfg = _config(config_path)
    r = cfg["johnson"]["resistance_ohm"] if resistance is None else resistance
    se = noise.johnson_SE(r, temperature, cfg.geometry(), cfg.constants())
    rec = {"resistance_ohm": r, "temperature_k": temperature, "se_v2_per_m2_hz": se,
           "rate_quanta_per_s": noise.SE_to_rate(se, cfg.trap(), cfg.constants())}
    _emit(_format_record(rec, fmt), out)


@noise_group.command("gate-error")
@out_option
@format_option
@click.option("--rate", type=float, required=True, help="Heating rate (quanta/s).")
@click.option("--gate-time", type=float, required=True, help="Gate duration (s).")
@handle_errors
def noise_gate_error(out, fmt, rate, gate_time):
    """Heating-limited gate error."""
    rec = {"rate_quanta_per_s": rate, "gate_time_s": gate_time, "gate_error": noise.gate_error(rate, gate_time)}
    _emit(_format_record(rec, fmt), out)


@noise_group.command("rescale")
@out_option
@format_option
@click.option("--se", type=float, required=True, help="S_E at the original distance.")
@click.option("--d-from", type=float, required=True, help="Original distance (m).")
@click.option("--d-to", type=float, required=True, help="Target distance (m).")
@click.option("--exponent", type=float, default=noise.PATCH_DISTANCE_EXPONENT, show_default=True)
@handle_errors
def noise_rescale(out, fmt, se, d_from, d_to, exponent):
    """Scale S_E between ion-electrode distances as d**-exponent."""
    rec = {"se_from": se, "d_from_m": d_from, "d_to_m": d_to, "exponent": exponent,
           "se_to": noise.distance_rescale(se, d_from, d_to, exponent)}
    _emit(_format_record(rec, fmt), out)


# -- collisions -------------------------------------------------------------


@main.group("collisions")
def collisions_group():
    """Background-gas collision estimates."""


gas_option = click.option("--gas", required=True, help="Gas species name from the config (e.g. H2, N2, O2).")
gas_temp_option = click.option("--gas-temperature", type=float, default=None, help="Gas temperature (K); config value by default.")


@collisions_group.command("density")
@config_option
@out_option
@format_option
@click.option("--gamma-e", type=float, required=True, help="Elastic collision rate (1/s).")
@gas_option
@gas_temp_option
@handle_errors
def collisions_density(config_path, out, fmt, gamma_e, gas, gas_temperature):
    """Gas density (cm^-3) implied by an elastic collision rate."""
    cfg = _config(config_path)
    g = cfg.gas(gas, gas_temperature)
    n = col.density_from_elastic_rate(gamma_e, g, cfg.ion(), cfg["collisions"]["elastic_coefficient"], cfg.constants())
    rec = {"gas": gas, "temperature_k": g.temperature, "gamma_e_per_s": gamma_e, "density_per_cm3": n}
    _emit(_format_record(rec, fmt), out)


@collisions_group.command("elastic")
@config_option
@out_option
@format_option
@click.option("--density", type=float, required=True, help="Gas density (cm^-3).")
@gas_option
@gas_temp_option
@handle_errors
def collisions_elastic(config_path, out, fmt, density, gas, gas_temperature):
    """Elastic collision rate (1/s) at a gas density."""
    cfg = _config(config_path)
    g = cfg.gas(gas, gas_temperature)
    rate = col.elastic_rate(density, g, cfg.ion(), cfg["collisions"]["elastic_coefficient"], cfg.constants())
    rec = {"gas": gas, "temperature_k": g.temperature, "density_per_cm3": density, "gamma_e_per_s": rate}
    _emit(_format_record(rec, fmt), out)


@collisions_group.command("langevin")
@config_option
@out_option
@format_option
@click.option("--density", type=float, required=True, help="Gas density (cm^-3).")
@gas_option
@handle_errors
def collisions_langevin(config_path, out, fmt, density, gas):
    """Langevin capture rate (1/s) at a gas density."""
    cfg = _config(config_path)
    rate = col.langevin_rate(density, cfg.gas(gas), cfg.ion(), cfg.constants())
    rec = {"gas": gas, "density_per_cm3": density, "langevin_rate_per_s": rate}
    _emit(_format_record(rec, fmt), out)


@collisions_group.command("energy")
@config_option
@out_option
@format_option
@gas_option
@gas_temp_option
@handle_errors
def collisions_energy(config_path, out, fmt, gas, gas_temperature):
    """Largest energy (eV) one gas molecule can give a resting ion."""
    cfg = _config(config_path)
    g = cfg.gas(gas, gas_temperature)
    e = col.max_energy_transfer(g, cfg.ion(), cfg["collisions"]["thermal_energy_factor"], cfg.constants())
    rec = {"gas": gas, "temperature_k": g.temperature,
           "transfer_fraction": col.energy_transfer_fraction(g.mass, cfg.ion().mass), "max_energy_ev": e}
    _emit(_format_record(rec, fmt), out)


@collisions_group.command("fit")
@click.argument("series_csv", type=click.Path(dir_okay=False))
@config_option
@out_option
@format_option
@click.option("--gamma-a", type=float, required=True, help="Anomalous heating rate held fixed (quanta/s).")
@handle_errors
def collisions_fit(series_csv, config_path, out, fmt, gamma_a):
    """Fit the elastic rate to an occupation series (delay_s,nbar,sigma)."""
    cfg = _config(config_path)
    table = read_table(series_csv, SERIES_HEADER)
    series = HeatingSeries(tuple(map(tuple, table)))
    res = col.fit_gamma_e(series, gamma_a, cfg["fit"]["max_iter"], cfg["fit"]["xtol"])
    rec = {"gamma_e_per_s": res.gamma_e, "gamma_e_sigma": res.gamma_e_sigma, "nbar0": res.nbar0,
           "nbar0_sigma": res.nbar0_sigma, "gamma_a": res.gamma_a, "chi2": res.chi2, "dof": res.dof,
           "at_validity_boundary": res.at_validity_boundary}
    _emit(_format_record(rec, fmt), out)


@collisions_group.command("check")
@config_option
@out_option
@format_option
@click.option("--lifetime", type=float, required=True, help="Ion lifetime (s).")
@click.option("--delay", type=float, required=True, help="Longest probe delay (s).")
@click.option("--rate", type=float, required=True, help="Measured heating rate (quanta/s).")
@handle_errors
def collisions_check(config_path, out, fmt, lifetime, delay, rate):
    """Lifetime test for collision-induced apparent heating."""
    cfg = _config(config_path)
    th = cfg["thresholds"]
    chk = col.collision_safety_check(col.LifetimeObservation(lifetime, delay, rate),
                                     th["collision_safety"], th["marginal_factor"])
    _emit(_format_record(dataclasses.asdict(chk), fmt), out)


# -- report -----------------------------------------------------------------


@main.command()
@click.argument("documents", nargs=-1, type=click.Path(dir_okay=False))
@config_option
@click.option("--mode", type=click.Choice(MODES), required=True)
@click.option("--out", "outdir", type=click.Path(file_okay=False), required=True, help="Output directory.")
@handle_errors
def report(documents, config_path, mode, outdir):
    """Tables and an SVG figure from result documents."""
    cfg = _config(config_path)
    docs = [ResultDocument.load(p) for p in documents]
    rep = build_report(docs, mode, cfg["power_law"]["breakpoint_k"])
    for note in rep.notes:
        click.echo(f"note: {note}", err=True)
    for path in write_report(rep, outdir):
        click.echo(str(path))


if __name__ == "__main__":  # pragma: no cover
    main()
