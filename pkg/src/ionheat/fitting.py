"""Least-squares engines shared by the inference routines.

``levenberg_marquardt`` is a damped Gauss-Newton minimizer of
``sum(residuals(x)**2)`` with optional box bounds handled by projection.
``weighted_linear_fit`` solves the straight-line normal equations in closed
form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, FitError, RankDeficiencyError

MAX_ITER = 200
XTOL = 1e-10
FTOL = 1e-15


@dataclass
class FitResult:
    """Generic fit output.

    ``errors`` are one-sigma uncertainties from the inverse curvature
    ``(J^T J)^-1`` of the weighted residuals, without rescaling by the
    reduced chi-square. Parameters the data do not constrain get ``inf``.
    """

    params: np.ndarray
    errors: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    n_iter: int = 0
    converged: bool = True
    at_bound: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    message: str = ""

    @property
    def redchi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")


def numerical_jacobian(fun, x, lower=None, upper=None, rel_step=None):
    """Central-difference Jacobian; one-sided next to a bound."""
    x = np.asarray(x, float)
    if rel_step is None:
        rel_step = np.finfo(float).eps ** (1 / 3)
    f0 = np.asarray(fun(x), float)
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        if upper is not None and xp[j] > upper[j]:
            jac[:, j] = (f0 - fun(xm)) / h
        elif lower is not None and xm[j] < lower[j]:
            jac[:, j] = (fun(xp) - f0) / h
        else:
            jac[:, j] = (fun(xp) - fun(xm)) / (2 * h)
    return jac


def _covariance(jac: np.ndarray):
    alpha = jac.T @ jac
    diag = np.diag(alpha)
    free = diag > 1e-300 * max(1.0, diag.max(initial=0.0))
    cov = np.full(alpha.shape, np.nan)
    if free.any():
        sub = alpha[np.ix_(free, free)]
        try:
            inv = np.linalg.inv(sub)
            if not np.all(np.isfinite(inv)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(sub)
        cov[np.ix_(free, free)] = inv
    errors = np.where(free, np.sqrt(np.abs(np.diag(cov))), np.inf)
    return cov, errors


def levenberg_marquardt(
    residuals: Callable[[np.ndarray], np.ndarray],
    x0,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    bounds=None,
    max_iter: int = MAX_ITER,
    xtol: float = XTOL,
    ftol: float = FTOL,
) -> FitResult:
    """Minimize ``sum(residuals(x)**2)``.

    ``residuals`` must already be weighted (divided by the per-point sigma)
    for the reported uncertainties to be meaningful. Iteration stops once an
    accepted step satisfies ``|dx| <= xtol * (|x| + xtol)`` (Euclidean norms)
    or lowers the cost by less than ``ftol`` relative. Raises
    :class:`ConvergenceError` if neither happens within ``max_iter``
    iterations.
    """
    x = np.array(x0, float)
    npar = x.size
    if bounds is None:
        lower = np.full(npar, -np.inf)
        upper = np.full(npar, np.inf)
    else:
        lower = np.broadcast_to(np.asarray(bounds[0], float), (npar,)).copy()
        upper = np.broadcast_to(np.asarray(bounds[1], float), (npar,)).copy()
    x = np.clip(x, lower, upper)

    def jacobian(p):
        if jac is not None:
            return np.asarray(jac(p), float)
        return numerical_jacobian(residuals, p, lower, upper)

    r = np.asarray(residuals(x), float)
    if r.size < npar:
        raise FitError(f"{r.size} residuals cannot constrain {npar} parameters")
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise FitError("residuals are not finite at the starting point", {"x0": x.tolist()})
    lam = 1e-3
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        J = jacobian(x)
        grad = J.T @ r
        # parameters pinned at a bound with the descent direction pointing out stay put
        free = ~(((x <= lower) & (grad > 0)) | ((x >= upper) & (grad < 0)))
        Jf = J[:, free]
        alpha = Jf.T @ Jf
        scale = np.maximum(np.diag(alpha), 1e-12 * max(np.diag(alpha).max(initial=0.0), 1e-300))
        improved = False
        while lam < 1e16:
            try:
                step = np.zeros(npar)
                step[free] = np.linalg.solve(alpha + lam * np.diag(scale), -grad[free])
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            x_new = np.clip(x + step, lower, upper)
            r_new = np.asarray(residuals(x_new), float)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                improved = True
                break
            lam *= 10
        if not improved:
            # no downhill step at any damping: stationary to working precision
            converged = True
            break
        dx = np.linalg.norm(x_new - x)
        drop = cost - cost_new
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / 10, 1e-12)
        if cost == 0.0 or dx <= xtol * (np.linalg.norm(x) + xtol) or drop <= ftol * cost:
            converged = True
            break

    if not converged:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations",
            {"params": x.tolist(), "chi2": cost, "lambda": lam},
        )
    J = jacobian(x)
    cov, errors = _covariance(J)
    at_bound = (np.isfinite(lower) & (x <= lower)) | (np.isfinite(upper) & (x >= upper))
    return FitResult(
        params=x,
        errors=errors,
        covariance=cov,
        chi2=cost,
        dof=r.size - npar,
        n_iter=n_iter,
        converged=True,
        at_bound=at_bound,
    )


def weighted_linear_fit(x, y, sigma) -> FitResult:
    """Straight line ``y = a + b x`` by weighted least squares.

    Returns a :class:`FitResult` with ``params == [a, b]``. Raises
    :class:`RankDeficiencyError` if all abscissae coincide.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sigma = np.asarray(sigma, float)
    if not (x.shape == y.shape == sigma.shape):
        raise FitError("x, y and sigma must have the same shape")
    if x.size < 2:
        raise FitError("need at least two points for a line")
    if np.any(~(sigma > 0)):
        raise FitError("all sigma must be positive")
    w = 1.0 / sigma**2
    s = w.sum()
    sx = (w * x).sum()
    xbar = sx / s
    # centred sums avoid cancellation for offset abscissae
    dx = x - xbar
    sxx = (w * dx * dx).sum()
    if not sxx > 1e-14 * s * max(1.0, float(np.max(np.abs(x))) ** 2):
        raise RankDeficiencyError("all abscissae are equal; slope is undetermined")
    slope = (w * dx * y).sum() / sxx
    ybar = (w * y).sum() / s
    intercept = ybar - slope * xbar
    var_b = 1.0 / sxx
    var_a = 1.0 / s + xbar**2 / sxx
    cov_ab = -xbar / sxx
    cov = np.array([[var_a, cov_ab], [cov_ab, var_b]])
    resid = (y - intercept - slope * x) / sigma
    return FitResult(
        params=np.array([intercept, slope]),
        errors=np.sqrt(np.diag(cov)),
        covariance=cov,
        chi2=float(resid @ resid),
        dof=x.size - 2,
        at_bound=np.zeros(2, bool),
    )
