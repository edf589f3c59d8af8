"""Hierarchical binomial model of female laureate counts.

For field ``f`` and prize year ``i``, the number of female laureates is

    f_i ~ Binomial(N_i, theta_i),    theta_i = alpha_f * r_{i - delta}

where ``r`` is the fitted faculty gender-ratio curve of the field's group and
``delta`` the nomination lag in years. ``alpha_f`` is the field's bias
factor (1 = awards mirror the candidate pool), drawn from
``Normal(mu, alpha_sd)`` restricted to the interval where every
``theta_i`` stays inside (0, 1); the common ``mu`` carries a
``Gamma(mu_shape, mu_rate)`` prior with mean 1. The normal's restriction
is imposed through the sampling transform rather than an explicit
truncation constant, so densities here are exact up to normalisation.

Sampling happens in unconstrained coordinates

    z_0 = log(mu),    alpha_f = alpha_max_f * sigmoid(z_f)

with the log-Jacobian of the transform folded into ``log_posterior``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import expit, gammaln, log_expit

from .data import FIELD_TO_GROUP, DataError, Field, LaureateRecord
from .ratios import RatioCurve, lagged_ratio


@dataclass(frozen=True)
class Hyperparams:
    """Fixed hyperparameters of the bias model."""

    alpha_sd: float = 0.35
    mu_shape: float = 5.0
    mu_rate: float = 5.0

    def __post_init__(self):
        for name in ("alpha_sd", "mu_shape", "mu_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ModelParams:
    """One constrained parameter point: common mean and per-field bias."""

    mu: float
    alpha: dict[Field, float]

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        for f, a in self.alpha.items():
            if not a > 0:
                raise ValueError(f"alpha[{f.value}] must be positive, got {a}")


@dataclass(frozen=True, eq=False)
class PreparedDataset:
    """Laureate counts joined with lagged shares, ready for the density.

    Rows with no awards are dropped; ``fields`` lists the fields that
    remain, in canonical order, and defines the parameter layout
    ``(mu, alpha_<fields[0]>, ...)``.
    """

    delta: int
    fields: tuple[Field, ...]
    years: np.ndarray       # (rows,) prize year
    n: np.ndarray           # (rows,) laureates awarded
    f: np.ndarray           # (rows,) of which female
    r: np.ndarray           # (rows,) gender ratio at year - delta
    fidx: np.ndarray        # (rows,) index into fields
    alpha_max: np.ndarray   # (len(fields),) upper bias bound per field
    hyper: Hyperparams = dc_field(default_factory=Hyperparams)

    @property
    def dim(self) -> int:
        return 1 + len(self.fields)

    @property
    def param_names(self) -> tuple[str, ...]:
        return ("mu",) + tuple(f"alpha_{f.value}" for f in self.fields)


def prepare(records: list[LaureateRecord],
            curves: dict,
            delta: int,
            hyper: Hyperparams = Hyperparams()) -> PreparedDataset:
    """Join laureate counts with lagged shares for a given lag.

    Parameters
    ----------
    records : list of LaureateRecord
    curves : dict mapping RatioGroup to RatioCurve (or LogisticParams)
    delta : int
        Nomination lag in years, >= 0.
    hyper : Hyperparams

    Raises
    ------
    DataError
        If delta is negative, no rows carry awards, or a field's group
        has no fitted curve.
    """
    if delta < 0:
        raise DataError(f"delta must be >= 0, got {delta}")
    rows = [rec for rec in records if rec.n_awarded > 0]
    if not rows:
        raise DataError("no rows with awards")
    fields = tuple(f for f in Field if any(rec.field is f for rec in rows))
    for f in fields:
        group = FIELD_TO_GROUP[f]
        if group not in curves:
            raise DataError(
                f"no ratio curve for group {group.value!r} (field {f.value})"
            )

    index = {f: i for i, f in enumerate(fields)}
    order = sorted(range(len(rows)), key=lambda j: (index[rows[j].field], rows[j].year))
    rows = [rows[j] for j in order]
    years = np.array([rec.year for rec in rows])
    n = np.array([rec.n_awarded for rec in rows], dtype=float)
    fem = np.array([rec.n_female for rec in rows], dtype=float)
    fidx = np.array([index[rec.field] for rec in rows])

    r = np.empty(len(rows))
    for f, i in index.items():
        curve = curves[FIELD_TO_GROUP[f]]
        params = curve.params if isinstance(curve, RatioCurve) else curve
        mask = fidx == i
        r[mask] = lagged_ratio(params, years[mask], delta)

    alpha_max = np.array([1.0 / r[fidx == i].max() for i in range(len(fields))])
    return PreparedDataset(
        delta=delta, fields=fields, years=years, n=n, f=fem, r=r,
        fidx=fidx, alpha_max=alpha_max, hyper=hyper,
    )


def prior_dataset(alpha_max: dict[Field, float],
                  hyper: Hyperparams = Hyperparams()) -> PreparedDataset:
    """A dataset with no observations: the density reduces to the prior.

    The density keeps the (0, alpha_max) restriction but no per-field
    normalising constant, so this is the joint-rejection prior: mu is
    reweighted by the joint in-bounds mass. Ancestral sampling redraws
    each field separately and keeps mu exactly gamma, so the two agree
    only where the bounds barely bite.
    """
    fields = tuple(f for f in Field if f in alpha_max)
    if not fields:
        raise DataError("no fields given")
    bounds = np.array([float(alpha_max[f]) for f in fields])
    if np.any(bounds <= 0):
        raise DataError("alpha_max must be positive")
    empty = np.empty(0)
    return PreparedDataset(
        delta=0, fields=fields, years=np.empty(0, dtype=int),
        n=empty, f=empty, r=empty, fidx=np.empty(0, dtype=int),
        alpha_max=bounds, hyper=hyper,
    )


def binomial_logpmf(f, n, theta):
    """Binomial log pmf including the log-gamma binomial coefficient.

    Parameters
    ----------
    f : int or array
        Successes, 0 <= f <= n.
    n : int or array
        Trials.
    theta : float or array
        Success probability in (0, 1).

    Returns
    -------
    float or ndarray
    """
    f = np.asarray(f, dtype=float)
    n = np.asarray(n, dtype=float)
    theta = np.asarray(theta, dtype=float)
    assert np.all((0 <= f) & (f <= n)), "need 0 <= f <= n"
    assert np.all((0 < theta) & (theta < 1)), "need theta in (0, 1)"
    out = (gammaln(n + 1) - gammaln(f + 1) - gammaln(n - f + 1)
           + f * np.log(theta) + (n - f) * np.log1p(-theta))
    return out if out.ndim else float(out)


def _log_likelihood(alpha: np.ndarray, data: PreparedDataset) -> float:
    """Binomial log likelihood, dropping the alpha-free coefficients.

    Returns -inf when any success probability is non-finite or rounds
    to 0 or 1 at floating precision, so boundary proposals are cleanly
    rejected.
    """
    theta = alpha[data.fidx] * data.r
    inside = (theta > 0.0) & (theta < 1.0)
    if not inside.all():
        return -np.inf
    return float(data.f @ np.log(theta) + (data.n - data.f) @ np.log1p(-theta))


def _dlike_dalpha(alpha: np.ndarray, data: PreparedDataset) -> np.ndarray:
    theta = alpha[data.fidx] * data.r
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (data.n - data.f) * data.r / (1.0 - theta)
        return (np.bincount(data.fidx, data.f, len(alpha)) / alpha
                - np.bincount(data.fidx, w, len(alpha)))


def constrained_log_density(mu: float, alpha: np.ndarray,
                            data: PreparedDataset) -> float:
    """Log posterior at a constrained point, up to an additive constant.

    No Jacobian terms; this is the density the sampler targets expressed
    directly in (mu, alpha). Used by grid integrations and tests.
    """
    h = data.hyper
    if mu <= 0 or np.any(alpha <= 0) or np.any(alpha >= data.alpha_max):
        return -np.inf
    lp = _log_likelihood(np.asarray(alpha, dtype=float), data)
    lp -= float(((alpha - mu) ** 2).sum()) / (2.0 * h.alpha_sd**2)
    lp += (h.mu_shape - 1.0) * np.log(mu) - h.mu_rate * mu
    return lp


def constrain(z: np.ndarray, data: PreparedDataset) -> np.ndarray:
    """Map unconstrained coordinates to (mu, alpha_1, ..., alpha_F)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    out[0] = np.exp(z[0])
    out[1:] = data.alpha_max * expit(z[1:])
    return out


def unconstrain(values: np.ndarray, data: PreparedDataset) -> np.ndarray:
    """Inverse of :func:`constrain`; values must lie strictly inside bounds."""
    values = np.asarray(values, dtype=float)
    if values[0] <= 0:
        raise ValueError(f"mu must be positive, got {values[0]}")
    frac = values[1:] / data.alpha_max
    if np.any(frac <= 0) or np.any(frac >= 1):
        raise ValueError("alpha out of (0, alpha_max)")
    z = np.empty_like(values)
    z[0] = np.log(values[0])
    z[1:] = np.log(frac) - np.log1p(-frac)
    return z


def to_model_params(values: np.ndarray, data: PreparedDataset) -> ModelParams:
    """Wrap a constrained vector as ModelParams keyed by field."""
    return ModelParams(
        mu=float(values[0]),
        alpha={f: float(values[1 + i]) for i, f in enumerate(data.fields)},
    )


def log_posterior(z: np.ndarray, data: PreparedDataset) -> float:
    """Unconstrained log posterior: constrained density plus log-Jacobian."""
    h = data.hyper
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        return -np.inf
    z0 = z[0]
    mu = np.exp(z0)
    log_s = log_expit(z[1:])
    log_1ms = log_expit(-z[1:])
    alpha = data.alpha_max * np.exp(log_s)
    lp = _log_likelihood(alpha, data)
    lp -= float(((alpha - mu) ** 2).sum()) / (2.0 * h.alpha_sd**2)
    # Gamma prior plus d(mu)/d(z0): (shape-1)*log(mu) - rate*mu + z0.
    lp += h.mu_shape * z0 - h.mu_rate * mu
    lp += float(np.sum(np.log(data.alpha_max) + log_s + log_1ms))
    return lp


def grad_log_posterior(z: np.ndarray, data: PreparedDataset) -> np.ndarray:
    """Analytic gradient of :func:`log_posterior` with respect to z."""
    h = data.hyper
    z = np.asarray(z, dtype=float)
    mu = np.exp(z[0])
    s = expit(z[1:])
    alpha = data.alpha_max * s
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        resid = (alpha - mu) / h.alpha_sd**2
        d_alpha = _dlike_dalpha(alpha, data) - resid
        grad = np.empty_like(z)
        grad[0] = mu * (resid.sum() - h.mu_rate) + h.mu_shape
        grad[1:] = d_alpha * data.alpha_max * s * (1.0 - s) + (1.0 - 2.0 * s)
    return grad


class PosteriorDensity:
    """Adapter exposing the model to the sampler: logp, grad, transform."""

    def __init__(self, data: PreparedDataset):
        self.data = data
        self.dim = data.dim
        self.param_names = data.param_names

    def logp(self, z: np.ndarray) -> float:
        return log_posterior(z, self.data)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return grad_log_posterior(z, self.data)

    def constrain(self, z: np.ndarray) -> np.ndarray:
        return constrain(z, self.data)


class FixedMuFieldDensity:
    """Single-field density with the common mean pinned.

    Restricts the model to one field (the prepared dataset must contain
    exactly one) and treats ``mu`` as a known constant, leaving a
    one-dimensional posterior over that field's bias factor. Used to
    check the sampler against direct numerical integration.
    """

    def __init__(self, data: PreparedDataset, mu: float = 1.0):
        if len(data.fields) != 1:
            raise ValueError(
                f"need a single-field dataset, got {len(data.fields)} fields"
            )
        if mu <= 0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.data = data
        self.mu = mu
        self.dim = 1
        self.param_names = (f"alpha_{data.fields[0].value}",)

    def logp(self, z: np.ndarray) -> float:
        h = self.data.hyper
        zf = np.asarray(z, dtype=float)
        log_s = log_expit(zf[0])
        alpha = self.data.alpha_max * np.exp(log_s)
        lp = _log_likelihood(alpha, self.data)
        lp -= float((alpha[0] - self.mu) ** 2) / (2.0 * h.alpha_sd**2)
        lp += float(np.log(self.data.alpha_max[0]) + log_s + log_expit(-zf[0]))
        return lp

    def grad(self, z: np.ndarray) -> np.ndarray:
        h = self.data.hyper
        zf = np.asarray(z, dtype=float)
        s = expit(zf[0])
        alpha = self.data.alpha_max * s
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d_alpha = (_dlike_dalpha(alpha, self.data)[0]
                       - (alpha[0] - self.mu) / h.alpha_sd**2)
            g = d_alpha * self.data.alpha_max[0] * s * (1.0 - s) + (1.0 - 2.0 * s)
        return np.array([g])

    def constrain(self, z: np.ndarray) -> np.ndarray:
        return self.data.alpha_max * expit(np.asarray(z, dtype=float))
