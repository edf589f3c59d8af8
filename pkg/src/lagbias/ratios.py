"""Logistic fits to the female faculty share per discipline group.

The female share of senior faculty grows roughly logistically over
the survey window, so each group's points are summarised by

    r(t) = L / (1 + exp(-k (t - t0)))

with ceiling ``L`` constrained to (0, 1]. The fitted curve is what the
bias model evaluates at ``award year - delta`` to get the candidate
pool's female share, including years far outside the survey window.

Fitting is damped Gauss-Newton least squares over a deterministic grid
of starting points; no stochastic search is involved, so refitting the
same points always returns the same curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import RatioGroup, RatioPoint

CURVE_YEAR_RANGE = (1881, 2018)

_L_FLOOR = 1e-6
_K_FLOOR = 1e-6
_MAX_ITER = 200

# Starting grid: midpoints spanning "already past" to "decades ahead",
# growth rates from near-linear to steep.
_T0_STARTS = (1960.0, 1980.0, 1990.0, 2000.0, 2010.0, 2030.0, 2060.0, 2100.0)
_K_STARTS = (0.01, 0.03, 0.06, 0.12, 0.25)


@dataclass(frozen=True)
class LogisticParams:
    """Parameters of one logistic gender-ratio curve."""

    ceiling: float
    steepness: float
    midpoint: float


@dataclass(frozen=True)
class RatioCurve:
    """A fitted ratio curve for one group, with its fit quality."""

    group: RatioGroup
    params: LogisticParams
    rms_residual: float


class FitError(RuntimeError):
    """Raised when a curve cannot be fit; carries the best attempt."""

    def __init__(self, message, params=None, residual=None):
        super().__init__(message)
        self.params = params
        self.residual = residual


def eval_ratio(params: LogisticParams, year):
    """Evaluate a ratio curve at one or more (possibly fractional) years."""
    t = np.asarray(year, dtype=float)
    out = params.ceiling * expit(params.steepness * (t - params.midpoint))
    return float(out) if np.isscalar(year) else out


def lagged_ratio(params: LogisticParams, award_year, delta: int):
    """Share of the candidate pool: the curve at ``award_year - delta``."""
    return eval_ratio(params, np.asarray(award_year) - delta)


def _residual_and_jacobian(theta, years, ratios):
    ceiling, steepness, midpoint = theta
    s = expit(steepness * (years - midpoint))
    resid = ratios - ceiling * s
    ds = s * (1.0 - s)
    jac = np.column_stack([
        -s,
        -ceiling * ds * (years - midpoint),
        ceiling * ds * steepness,
    ])
    return resid, jac


def _clamp(theta):
    ceiling = min(max(theta[0], _L_FLOOR), 1.0)
    steepness = max(theta[1], _K_FLOOR)
    return np.array([ceiling, steepness, theta[2]])


def _gauss_newton(theta0, years, ratios):
    """Levenberg-damped Gauss-Newton from one start. Returns (theta, sse)."""
    theta = _clamp(theta0)
    resid, jac = _residual_and_jacobian(theta, years, ratios)
    sse = float(resid @ resid)
    lam = 1e-3
    for _ in range(_MAX_ITER):
        a = jac.T @ jac
        g = jac.T @ resid
        stepped = False
        for _ in range(40):
            try:
                step = np.linalg.solve(a + lam * np.diag(np.diag(a) + 1e-12), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = _clamp(theta + step)
            cand_resid, cand_jac = _residual_and_jacobian(cand, years, ratios)
            cand_sse = float(cand_resid @ cand_resid)
            if np.isfinite(cand_sse) and cand_sse <= sse:
                improved = sse - cand_sse
                theta, resid, jac, sse = cand, cand_resid, cand_jac, cand_sse
                lam = max(lam / 10.0, 1e-12)
                stepped = True
                if improved <= 1e-14 * (sse + 1e-14):
                    return theta, sse, True
                break
            lam *= 10.0
        if not stepped:
            return theta, sse, True
    return theta, sse, False


def fit_logistic(points: list[RatioPoint]) -> RatioCurve:
    """Fit one group's ratio curve by damped Gauss-Newton least squares.

    Parameters
    ----------
    points : list of RatioPoint
        All points must belong to the same group.

    Returns
    -------
    RatioCurve
        The best fit over a deterministic grid of starting values.

    Raises
    ------
    FitError
        If the points span fewer than 3 distinct ratio values (the
        curve would be degenerate), or if no start converges. The
        exception carries the best parameters and residual seen.
    """
    if not points:
        raise FitError("no points to fit")
    groups = {p.group for p in points}
    if len(groups) != 1:
        raise FitError(f"points span multiple groups: {sorted(g.value for g in groups)}")
    group = groups.pop()
    if len({p.ratio for p in points}) < 3:
        raise FitError(f"group {group.value!r}: fewer than 3 distinct ratio values")

    years = np.array([p.year for p in points], dtype=float)
    ratios = np.array([p.ratio for p in points], dtype=float)
    ceiling0 = min(1.0, 1.5 * float(ratios.max()))

    best = None
    converged_any = False
    for t0 in _T0_STARTS:
        for k in _K_STARTS:
            theta, sse, ok = _gauss_newton(
                np.array([ceiling0, k, t0]), years, ratios
            )
            converged_any = converged_any or ok
            if best is None or sse < best[1] - 1e-15:
                best = (theta, sse)

    theta, sse = best
    params = LogisticParams(
        ceiling=float(theta[0]), steepness=float(theta[1]), midpoint=float(theta[2])
    )
    rms = float(np.sqrt(sse / len(points)))
    if not converged_any:
        raise FitError(
            f"group {group.value!r}: no start converged",
            params=params, residual=rms,
        )
    return RatioCurve(group=group, params=params, rms_residual=rms)


def fit_all(points: list[RatioPoint]) -> dict[RatioGroup, RatioCurve]:
    """Fit every group present in a point set, keyed by group."""
    return {
        group: fit_logistic([p for p in points if p.group is group])
        for group in RatioGroup
        if any(p.group is group for p in points)
    }


def curve_series(params: LogisticParams, year_range=CURVE_YEAR_RANGE):
    """Annual (years, shares) arrays over a year range, inclusive."""
    years = np.arange(year_range[0], year_range[1] + 1)
    return years, eval_ratio(params, years)


def curves_payload(curves: dict[RatioGroup, RatioCurve],
                   points: list[RatioPoint]) -> dict:
    """JSON-ready description of fitted curves with their annual series."""
    groups = []
    for group, curve in curves.items():
        years, shares = curve_series(curve.params)
        pts = [p for p in points if p.group is group]
        groups.append({
            "group": group.value,
            "params": {
                "ceiling": curve.params.ceiling,
                "steepness": curve.params.steepness,
                "midpoint": curve.params.midpoint,
            },
            "rms_residual": curve.rms_residual,
            "observed": {
                "year": [p.year for p in pts],
                "ratio": [p.ratio for p in pts],
            },
            "series": {
                "year": years.tolist(),
                "ratio": [float(v) for v in shares],
            },
        })
    return {"schema": "ratio-curves/1", "groups": groups}
