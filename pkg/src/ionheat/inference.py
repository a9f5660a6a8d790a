"""Statistical estimation from sideband scans.

Amplitude fits of individual sideband scans, occupation from red/blue
amplitude ratios, heating-rate line fits and segmented power-law fits of rate
against electrode temperature.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import FitError, IonHeatError, SaturatedRatioError
from .fitting import FitResult, levenberg_marquardt, weighted_linear_fit
from .physics import Sideband, nbar_from_ratio

DEFAULT_BREAKPOINT_K = 70.0


class ScanPoint(NamedTuple):
    detuning: float  # Hz relative to the carrier
    shots: int
    bright: int  # shots registering the sideband excitation


@dataclass(frozen=True)
class SidebandScan:
    delay: float
    probe_duration: float
    which: Sideband
    points: tuple[ScanPoint, ...]
    probe_rabi: float | None = None
    metadata: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.which not in ("red", "blue"):
            raise IonHeatError(f"sideband must be 'red' or 'blue', got {self.which!r}")
        if not self.delay >= 0:
            raise IonHeatError("probe delay must be >= 0")
        if not self.probe_duration > 0:
            raise IonHeatError("probe duration must be positive")
        pts = tuple(ScanPoint(float(d), int(n), int(k)) for d, n, k in self.points)
        for p in pts:
            if p.shots < 1:
                raise IonHeatError(f"shots must be >= 1 (detuning {p.detuning} Hz)")
            if not 0 <= p.bright <= p.shots:
                raise IonHeatError(
                    f"bright={p.bright} outside [0, shots={p.shots}] (detuning {p.detuning} Hz)"
                )
        object.__setattr__(self, "points", pts)

    @property
    def detunings(self) -> np.ndarray:
        return np.array([p.detuning for p in self.points], float)

    @property
    def shots(self) -> np.ndarray:
        return np.array([p.shots for p in self.points], int)

    @property
    def bright(self) -> np.ndarray:
        return np.array([p.bright for p in self.points], int)


@dataclass(frozen=True)
class ScanFitResult:
    amplitude: float
    amplitude_sigma: float
    center: float
    center_sigma: float
    width: float
    width_sigma: float
    goodness: float  # chi-square per degree of freedom
    dof: int = 0
    low_signal: bool = False
    amplitude_at_bound: bool = False

    def __post_init__(self):
        if not 0 <= self.amplitude <= 1:
            raise IonHeatError("fitted amplitude must lie in [0, 1]")


class HeatingPoint(NamedTuple):
    delay: float
    nbar: float
    sigma: float


@dataclass(frozen=True)
class HeatingSeries:
    points: tuple[HeatingPoint, ...]
    temperature: float | None = None
    trap_id: str = ""

    def __post_init__(self):
        pts = tuple(HeatingPoint(float(t), float(n), float(s)) for t, n, s in self.points)
        for p in pts:
            if not p.delay >= 0:
                raise IonHeatError("delays must be >= 0")
            if not p.sigma > 0:
                raise IonHeatError(f"sigma must be positive (delay {p.delay} s)")
        object.__setattr__(self, "points", pts)

    def arrays(self):
        a = np.array(self.points, float).reshape(-1, 3)
        return a[:, 0], a[:, 1], a[:, 2]


@dataclass(frozen=True)
class HeatingRateResult:
    rate: float
    rate_sigma: float
    intercept: float
    intercept_sigma: float
    covariance: np.ndarray
    chi2: float
    dof: int


@dataclass(frozen=True)
class PowerLawSegment:
    t_min: float
    t_max: float
    exponent: float
    exponent_sigma: float
    prefactor: float
    log_prefactor_sigma: float
    n_points: int
    chi2: float

    def evaluate(self, temperature):
        return self.prefactor * np.asarray(temperature, float) ** self.exponent


@dataclass(frozen=True)
class PowerLawResult:
    segments: tuple[PowerLawSegment, ...]
    breakpoint: float


def projection_sigma(bright: int, shots: int) -> float:
    """Binomial standard error of the excitation probability ``bright/shots``.

    Zero and full counts use the rule-of-succession estimate
    ``(bright+1)/(shots+2)`` so that no point gets zero variance.
    """
    if shots < 1:
        raise IonHeatError("shots must be >= 1")
    if not 0 <= bright <= shots:
        raise IonHeatError(f"bright={bright} outside [0, {shots}]")
    if bright == 0 or bright == shots:
        p = (bright + 1) / (shots + 2)
    else:
        p = bright / shots
    return math.sqrt(p * (1 - p) / shots)


def rabi_lineshape(detuning, center: float, width: float, duration: float):
    """Rabi excitation profile normalised to one at resonance.

    ``width`` is the Rabi frequency in Hz of the driven transition and
    ``duration`` the probe pulse length; detunings are in Hz. Fits keep the
    pulse area ``2 pi width duration`` at or below ``pi`` so that the
    profile peaks at ``center``.
    """
    x = np.asarray(detuning, float) - center
    w2 = width * width
    f_eff = np.sqrt(w2 + x * x)
    peak = math.sin(math.pi * width * duration) ** 2
    return (w2 / (w2 + x * x)) * np.sin(np.pi * f_eff * duration) ** 2 / peak


def _width_bounds(duration: float):
    return 1e-6 / duration, 0.5 / duration


def fit_lineshape(
    detuning,
    p,
    sigma,
    duration: float,
    *,
    fixed_width: float | None = None,
    fixed_center: float | None = None,
    max_iter: int = 200,
    xtol: float = 1e-10,
) -> ScanFitResult:
    """Weighted fit of ``amplitude * rabi_lineshape`` to excitation data.

    Start values: centre at the most excited detuning, amplitude at the
    largest excitation, width from the profile's second moment.
    """
    detuning = np.asarray(detuning, float)
    p = np.asarray(p, float)
    sigma = np.asarray(sigma, float)
    free_params = 3 - (fixed_width is not None) - (fixed_center is not None)
    if detuning.size < max(5, free_params + 1):
        raise FitError(f"need at least 5 detuning points, got {detuning.size}")
    if np.any(~(sigma > 0)):
        raise FitError("all sigma must be positive")

    w_lo, w_hi = _width_bounds(duration)
    i_max = int(np.argmax(p))
    c0 = detuning[i_max] if fixed_center is None else fixed_center
    a0 = float(np.clip(p[i_max], 0.0, 1.0))
    weight = np.clip(p - p.min(), 0.0, None)
    if weight.sum() > 0:
        w0 = math.sqrt(float((weight * (detuning - c0) ** 2).sum() / weight.sum()))
    else:
        w0 = w_hi
    spacing = float(np.min(np.diff(np.unique(detuning))))
    w0 = float(np.clip(w0, min(max(2 * spacing, w_lo), w_hi), w_hi))
    if fixed_width is not None:
        if not w_lo <= fixed_width <= w_hi:
            raise FitError(f"fixed width {fixed_width} Hz outside ({w_lo}, {w_hi})")
        w0 = fixed_width

    def unpack(x):
        a = x[0]
        i = 1
        if fixed_center is None:
            c = x[i]
            i += 1
        else:
            c = fixed_center
        w = x[i] if fixed_width is None else fixed_width
        return a, c, w

    x0 = [a0]
    lower = [0.0]
    upper = [1.0]
    if fixed_center is None:
        x0.append(c0)
        lower.append(-np.inf)
        upper.append(np.inf)
    if fixed_width is None:
        x0.append(w0)
        lower.append(w_lo)
        upper.append(w_hi)

    def residuals(x):
        a, c, w = unpack(x)
        return (a * rabi_lineshape(detuning, c, w, duration) - p) / sigma

    res = levenberg_marquardt(residuals, x0, bounds=(lower, upper), max_iter=max_iter, xtol=xtol)
    a, c, w = unpack(res.params)
    errs = list(res.errors)
    a_err = errs.pop(0)
    c_err = errs.pop(0) if fixed_center is None else 0.0
    w_err = errs.pop(0) if fixed_width is None else 0.0
    return ScanFitResult(
        amplitude=float(a),
        amplitude_sigma=float(a_err),
        center=float(c),
        center_sigma=float(c_err),
        width=float(w),
        width_sigma=float(w_err),
        goodness=float(res.redchi2),
        dof=res.dof,
        low_signal=bool(not a > 2 * a_err),
        amplitude_at_bound=bool(res.at_bound[0]),
    )


def scan_excitation(scan: SidebandScan):
    """Observed excitation probabilities and projection-noise sigmas."""
    shots = scan.shots
    bright = scan.bright
    p = bright / shots
    sigma = np.array([projection_sigma(int(k), int(n)) for k, n in zip(bright, shots)])
    return p, sigma


def model_sigma(p_model, shots):
    """Binomial sigma at model probabilities, floored like :func:`projection_sigma`."""
    shots = np.asarray(shots, float)
    floor = 1.0 / (shots + 2)
    p = np.clip(np.asarray(p_model, float), floor, 1 - floor)
    return np.sqrt(p * (1 - p) / shots)


def fit_scan(scan: SidebandScan, reweight: int = 1, **kwargs) -> ScanFitResult:
    """Fit one sideband scan.

    The first pass weights points by :func:`projection_sigma` of the observed
    counts. Each of the ``reweight`` further passes refits with binomial
    sigmas evaluated at the previous fit's prediction, which removes the bias
    toward downward-fluctuating points that observed-count weights cause at
    low excitation. Keyword arguments go to :func:`fit_lineshape`.
    """
    order = np.argsort(scan.detunings, kind="stable")
    detuning = scan.detunings[order]
    shots = scan.shots[order]
    p, sigma = scan_excitation(scan)
    p, sigma = p[order], sigma[order]
    result = fit_lineshape(detuning, p, sigma, scan.probe_duration, **kwargs)
    for _ in range(reweight):
        predicted = result.amplitude * rabi_lineshape(
            detuning, result.center, result.width, scan.probe_duration
        )
        result = fit_lineshape(
            detuning, p, model_sigma(predicted, shots), scan.probe_duration, **kwargs
        )
    if scan.bright.sum() == 0 and not result.low_signal:
        result = replace(result, low_signal=True)
    return result


def nbar_from_scans(red: ScanFitResult, blue: ScanFitResult) -> tuple[float, float]:
    """Mean occupation and its sigma from fitted red and blue amplitudes.

    The ratio uncertainty combines both relative amplitude errors in
    quadrature and is propagated through ``r/(1-r)`` to first order.
    """
    if not blue.amplitude > 0:
        raise IonHeatError("blue sideband amplitude must be positive")
    r = red.amplitude / blue.amplitude
    if r >= 1:
        raise SaturatedRatioError(
            f"red/blue amplitude ratio {r:.4g} >= 1; data may be collision-dominated"
        )
    nbar = nbar_from_ratio(r).nbar
    var_r = (red.amplitude_sigma / blue.amplitude) ** 2 + (
        red.amplitude * blue.amplitude_sigma / blue.amplitude**2
    ) ** 2
    return nbar, math.sqrt(var_r) / (1 - r) ** 2


def fit_heating_rate(series: HeatingSeries) -> HeatingRateResult:
    """Weighted straight-line fit ``nbar(t) = nbar0 + rate * t``."""
    if len(series.points) < 3:
        raise FitError(f"need at least 3 points, got {len(series.points)}")
    t, n, s = series.arrays()
    fit = weighted_linear_fit(t, n, s)
    intercept, rate = fit.params
    if intercept < 0:
        warnings.warn(
            f"fitted zero-delay occupation {intercept:.3g} is negative", RuntimeWarning, stacklevel=2
        )
    return HeatingRateResult(
        rate=float(rate),
        rate_sigma=float(fit.errors[1]),
        intercept=float(intercept),
        intercept_sigma=float(fit.errors[0]),
        covariance=fit.covariance[::-1, ::-1].copy(),
        chi2=fit.chi2,
        dof=fit.dof,
    )


def _fit_segment(temps, rates, sigmas) -> PowerLawSegment:
    fit: FitResult = weighted_linear_fit(np.log(temps), np.log(rates), sigmas / rates)
    log_c, beta = fit.params
    return PowerLawSegment(
        t_min=float(temps.min()),
        t_max=float(temps.max()),
        exponent=float(beta),
        exponent_sigma=float(fit.errors[1]),
        prefactor=float(math.exp(log_c)),
        log_prefactor_sigma=float(fit.errors[0]),
        n_points=int(temps.size),
        chi2=fit.chi2,
    )


def fit_power_law(
    points: Sequence[tuple[float, float, float]], breakpoint: float = DEFAULT_BREAKPOINT_K
) -> PowerLawResult:
    """Independent log-log line fits below and at/above ``breakpoint``.

    ``points`` are ``(temperature K, rate, sigma)``. A segment with no data is
    omitted; one with a single point is an error.
    """
    arr = np.array(points, float).reshape(-1, 3)
    if arr.shape[0] == 0:
        raise FitError("no points to fit")
    temps, rates, sigmas = arr.T
    if np.any(~(temps > 0)) or np.any(~(rates > 0)) or np.any(~(sigmas > 0)):
        raise IonHeatError("temperatures, rates and sigmas must all be positive")
    segments = []
    for label, mask in (("below", temps < breakpoint), ("above", temps >= breakpoint)):
        count = int(mask.sum())
        if count == 0:
            continue
        if count < 2:
            raise FitError(f"segment {label} {breakpoint} K has a single point")
        segments.append(_fit_segment(temps[mask], rates[mask], sigmas[mask]))
    return PowerLawResult(segments=tuple(segments), breakpoint=float(breakpoint))
