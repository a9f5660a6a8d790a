"""Plot-ready tables and static figures from result documents.

Two views are supported. ``"temperature"`` tabulates heating rate against
electrode temperature and overlays the segmented power-law fit.
``"distance"`` tabulates the frequency-normalised field noise against
ion-electrode distance with ``d**-4`` guide curves.
"""
from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FitError, IonHeatError
from .inference import DEFAULT_BREAKPOINT_K, PowerLawResult, fit_power_law
from .io import ResultDocument, decode_number
from .noise import PATCH_DISTANCE_EXPONENT

MODES = ("temperature", "distance")
CURVE_POINTS = 50
_AXES = {
    "temperature": (("trap", "electrode_temperature"), ("heating_rate", "rate"), "K", "quanta/s"),
    "distance": (("trap", "ion_electrode_distance"), ("field_noise", "omega_spectral_density"), "m", "V^2/m^2"),
}
_HEADERS = {
    "temperature": (("trap_id", "temperature_k", "rate_quanta_per_s", "sigma_quanta_per_s"),
                    ("curve", "temperature_k", "rate_quanta_per_s")),
    "distance": (("trap_id", "distance_m", "omega_se_v2_per_m2", "sigma_v2_per_m2"),
                 ("curve", "distance_m", "omega_se_v2_per_m2")),
}


@dataclass(frozen=True)
class Report:
    mode: str
    points: tuple[tuple, ...]  # (label, x, y, sigma)
    curves: tuple[tuple, ...]  # (curve name, x, y)
    fit: PowerLawResult | None = None
    notes: tuple[str, ...] = ()

    def points_csv(self) -> str:
        return _csv(_HEADERS[self.mode][0], self.points)

    def curves_csv(self) -> str:
        return _csv(_HEADERS[self.mode][1], self.curves)


def _csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _extract(doc: ResultDocument, mode: str):
    (xs, xk), (ys, yk), x_unit, y_unit = _AXES[mode]
    body = doc.body
    try:
        xq = body[xs][xk]
        stage = body["stages"][ys]
    except KeyError:
        raise IonHeatError(f"document lacks the fields needed for a {mode} report") from None
    if stage.get("status") != "ok":
        return None
    yq = stage[yk]
    if xq["unit"] != x_unit or yq["unit"] != y_unit:
        raise IonHeatError(
            f"mixed units: expected {x_unit} and {y_unit}, found {xq['unit']} and {yq['unit']}"
        )
    label = body.get("trap", {}).get("trap_id", "")
    return label, decode_number(xq["value"]), decode_number(yq["value"]), decode_number(yq.get("sigma", 0.0))


def build_report(
    documents: Sequence[ResultDocument], mode: str, breakpoint: float = DEFAULT_BREAKPOINT_K
) -> Report:
    """Collect points from ``documents`` and compute the overlay curves.

    Documents whose relevant stage failed are skipped; an empty set, or one
    with no usable document, is an error. If the power law cannot be fitted
    the temperature table is still returned, with the reason in ``notes``.
    """
    if mode not in MODES:
        raise IonHeatError(f"report mode must be one of {MODES}, got {mode!r}")
    if not documents:
        raise IonHeatError("no result documents given")
    rows = [r for r in (_extract(d, mode) for d in documents) if r is not None]
    if not rows:
        raise IonHeatError(f"no document carries a usable {mode} data point")
    rows.sort(key=lambda r: (r[1], r[0]))
    x = np.array([r[1] for r in rows])
    y = np.array([r[2] for r in rows])
    s = np.array([r[3] for r in rows])

    curves = []
    notes = []
    fit = None
    if mode == "temperature":
        usable = (x > 0) & (y > 0) & (s > 0)
        try:
            fit = fit_power_law(np.column_stack([x[usable], y[usable], s[usable]]), breakpoint)
        except FitError as exc:
            notes.append(f"no power-law overlay: {exc}")
        if fit is not None:
            for k, seg in enumerate(fit.segments):
                grid = np.geomspace(seg.t_min, seg.t_max, CURVE_POINTS) if seg.t_max > seg.t_min else [seg.t_min]
                name = f"power_law_{k}_beta={seg.exponent:.4g}"
                curves += [(name, float(t), float(seg.evaluate(t))) for t in grid]
    else:
        good = (x > 0) & (y > 0)
        if good.any():
            # anchor the guide at the log-mean of the points
            lx, ly = np.log(x[good]), np.log(y[good])
            anchor = float(np.exp(np.mean(ly + PATCH_DISTANCE_EXPONENT * lx)))
            grid = np.geomspace(x[good].min() / 2, x[good].max() * 2, CURVE_POINTS)
            curves = [("d^-4", float(d), anchor * float(d) ** -PATCH_DISTANCE_EXPONENT) for d in grid]
    return Report(mode, tuple(rows), tuple(curves), fit, tuple(notes))


def render_svg(report: Report) -> str:
    """Log-log figure of ``report``; identical inputs give identical bytes."""
    import matplotlib

    from matplotlib.figure import Figure

    with matplotlib.rc_context({"svg.hashsalt": "ionheat", "svg.fonttype": "path"}):
        fig = Figure(figsize=(5, 4))
        ax = fig.add_subplot()
        labels = sorted({r[0] for r in report.points})
        for label in labels:
            pts = np.array([r[1:] for r in report.points if r[0] == label], float)
            ax.errorbar(pts[:, 0], pts[:, 1], yerr=pts[:, 2], fmt="o", ms=4, capsize=2, label=label or None)
        names = list(dict.fromkeys(c[0] for c in report.curves))
        for name in names:
            c = np.array([r[1:] for r in report.curves if r[0] == name], float)
            ax.plot(c[:, 0], c[:, 1], "-", lw=1, label=name)
        ax.set_xscale("log")
        ax.set_yscale("log")
        if report.mode == "temperature":
            ax.set_xlabel("electrode temperature (K)")
            ax.set_ylabel("heating rate (quanta/s)")
        else:
            ax.set_xlabel("ion-electrode distance (m)")
            ax.set_ylabel(r"$\omega S_E$ (V$^2$/m$^2$)")
        if labels != [""] or names:
            ax.legend(fontsize=7)
        fig.tight_layout()
        buf = _io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def write_report(report: Report, outdir: str | Path) -> list[Path]:
    """Write ``<mode>_points.csv``, ``<mode>_curves.csv`` and ``<mode>.svg``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {
        outdir / f"{report.mode}_points.csv": report.points_csv(),
        outdir / f"{report.mode}_curves.csv": report.curves_csv(),
        outdir / f"{report.mode}.svg": render_svg(report),
    }
    for path, text in files.items():
        path.write_text(text)
    return list(files)
