"""Posterior summaries, prior sampling, lag sweeps and figure data.

Everything here consumes the sampler's output (or runs it) and shapes
results for the delimited/JSON artifacts the command line writes. The
figure payloads are self-describing JSON (axis labels included) so a
renderer needs no knowledge of the model.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import gaussian_kde

from .data import Field, LaureateRecord, RatioPoint
from .hmc import (Diagnostics, HmcConfig, PosteriorDraws, SamplerError,
                  compute_diagnostics, sample)
from .model import PosteriorDensity, PreparedDataset, prepare
from .ratios import RatioCurve, curve_series

QUANTILE_LEVELS = (2.5, 25.0, 50.0, 75.0, 97.5)
DENSITY_GRID = np.linspace(0.0, 2.5, 501)


def prob_ge(values: np.ndarray, threshold: float = 1.0) -> float:
    """Fraction of draws at or above a threshold."""
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("no draws")
    return float(np.mean(values >= threshold))


@dataclass(frozen=True, eq=False)
class PriorDraws:
    """Ancestral draws from the prior in constrained coordinates."""

    draws: np.ndarray           # (n, dim) columns as in param_names
    param_names: tuple[str, ...]
    rejection_fraction: float


def sample_prior(data: PreparedDataset, n: int, seed: int) -> PriorDraws:
    """Draw (mu, alpha_1..alpha_F) ancestrally from the prior.

    ``mu`` comes from its gamma prior; each field's bias is normal
    around ``mu`` and redrawn until it falls inside (0, alpha_max), the
    same restriction the posterior lives under. The fraction of redrawn
    normals is reported so the restriction's bite is visible.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h = data.hyper
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    mu = rng.gamma(h.mu_shape, 1.0 / h.mu_rate, size=n)
    draws = np.empty((n, data.dim))
    draws[:, 0] = mu
    rejected = 0
    total = 0
    for j, amax in enumerate(data.alpha_max):
        alpha = mu + h.alpha_sd * rng.standard_normal(n)
        total += n
        bad = (alpha <= 0.0) | (alpha >= amax)
        while bad.any():
            k = int(bad.sum())
            rejected += k
            total += k
            alpha[bad] = mu[bad] + h.alpha_sd * rng.standard_normal(k)
            bad = (alpha <= 0.0) | (alpha >= amax)
        draws[:, 1 + j] = alpha
    return PriorDraws(
        draws=draws,
        param_names=data.param_names,
        rejection_fraction=rejected / total,
    )


@dataclass(frozen=True)
class ParamSummary:
    """Posterior summary of one parameter."""

    name: str
    mean: float
    sd: float
    quantiles: dict[str, float]
    prob_ge_one: float
    ess: float
    rhat: float


def summarize_posterior(draws: PosteriorDraws,
                        diagnostics: Diagnostics | None = None) -> list[ParamSummary]:
    """Pooled-chain summaries for every parameter, diagnostics included."""
    if diagnostics is None:
        diagnostics = compute_diagnostics(draws)
    out = []
    for j, name in enumerate(draws.param_names):
        pooled = draws.draws[:, :, j].ravel()
        qs = np.percentile(pooled, QUANTILE_LEVELS)
        out.append(ParamSummary(
            name=name,
            mean=float(pooled.mean()),
            sd=float(pooled.std(ddof=1)),
            quantiles={f"{q:g}": float(v) for q, v in zip(QUANTILE_LEVELS, qs)},
            prob_ge_one=prob_ge(pooled),
            ess=float(diagnostics.ess[j]),
            rhat=float(diagnostics.rhat[j]),
        ))
    return out


def kde_density(samples: np.ndarray, grid: np.ndarray = DENSITY_GRID) -> np.ndarray:
    """Gaussian kernel density (Silverman bandwidth) on a fixed grid.

    The kernel is reflected at zero: bias factors are positive by
    construction, and reflection keeps the estimate from smearing mass
    below the support boundary.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2 or np.all(samples == samples[0]):
        raise ValueError("need at least 2 distinct samples")
    kde = gaussian_kde(samples, bw_method="silverman")
    return kde(grid) + kde(-grid)


# ---------------------------------------------------------------------------
# Lag sweep


@dataclass(frozen=True)
class SweepRow:
    """One (lag, field) cell of the sweep table."""

    delta: int
    field: Field
    prob_ge_one: float
    mean_alpha: float


def derive_sweep_seed(seed: int, delta: int) -> int:
    """Per-lag seed so sweep cells are reproducible in isolation."""
    return int(np.random.SeedSequence([seed, delta]).generate_state(1)[0])


def _sweep_one(args):
    records, curves, delta, config = args
    data = prepare(records, curves, delta)
    run_config = replace(config, seed=derive_sweep_seed(config.seed, delta))
    try:
        draws = sample(PosteriorDensity(data), run_config)
    except SamplerError as e:
        raise SamplerError(f"delta={delta}: {e}") from e
    rows = []
    for j, f in enumerate(data.fields):
        pooled = draws.draws[:, :, 1 + j].ravel()
        rows.append(SweepRow(
            delta=delta,
            field=f,
            prob_ge_one=prob_ge(pooled),
            mean_alpha=float(pooled.mean()),
        ))
    return rows


def delta_sweep(records: list[LaureateRecord],
                curves: dict,
                delta_min: int,
                delta_max: int,
                config: HmcConfig,
                workers: int = 1) -> list[SweepRow]:
    """Rerun the whole analysis for every lag in [delta_min, delta_max].

    ``config.seed`` acts as the base seed; each lag runs with the seed
    from :func:`derive_sweep_seed`, so results do not depend on
    ``workers`` or scheduling order.
    """
    if delta_min > delta_max:
        raise ValueError(f"empty lag range [{delta_min}, {delta_max}]")
    deltas = list(range(delta_min, delta_max + 1))
    tasks = [(records, curves, d, config) for d in deltas]
    if workers > 1 and len(deltas) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_delta = list(pool.map(_sweep_one, tasks))
    else:
        per_delta = [_sweep_one(t) for t in tasks]
    return [row for rows in per_delta for row in rows]


def sweep_csv_text(rows: list[SweepRow]) -> str:
    """Render sweep rows as the canonical delimited table."""
    lines = ["delta,field,prob_ge_one,mean_alpha"]
    for row in rows:
        lines.append(
            f"{row.delta},{row.field.value},"
            f"{row.prob_ge_one:.6f},{row.mean_alpha:.6f}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Figure payloads


def json_text(obj) -> str:
    """Canonical JSON serialization: sorted keys, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path, text: str) -> None:
    """Write text via a temp file and rename, so readers never see partials."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def emit_figure_data(out_dir,
                     records: list[LaureateRecord],
                     points: list[RatioPoint],
                     curves: dict,
                     prior: PriorDraws,
                     draws: PosteriorDraws,
                     delta: int,
                     sweep_rows: list[SweepRow] | None = None) -> list[Path]:
    """Write the self-describing fig-data files; returns written paths.

    fig4 is only written when sweep rows are given.
    """
    payloads = [
        ("fig1.json", fig1_payload(records)),
        ("fig2.json", fig2_payload(points, curves)),
        ("fig3.json", fig3_payload(prior, draws, delta)),
    ]
    if sweep_rows is not None:
        payloads.append(("fig4.json", fig4_payload(sweep_rows)))
    written = []
    for name, payload in payloads:
        path = Path(out_dir) / name
        write_atomic(path, json_text(payload))
        written.append(path)
    return written


def fig1_payload(records: list[LaureateRecord]) -> dict:
    """Total and female laureate counts per field (bar chart data)."""
    awards = {f: 0 for f in Field}
    female = {f: 0 for f in Field}
    for rec in records:
        awards[rec.field] += rec.n_awarded
        female[rec.field] += rec.n_female
    return {
        "schema": "figure/1",
        "id": "fig1",
        "kind": "grouped_bars",
        "title": "Nobel laureates by field and gender",
        "x_label": "field",
        "y_label": "laureates",
        "categories": [f.value for f in Field],
        "series": [
            {"name": "male",
             "values": [awards[f] - female[f] for f in Field]},
            {"name": "female",
             "values": [female[f] for f in Field]},
        ],
    }


def fig2_payload(points: list[RatioPoint],
                 curves: dict) -> dict:
    """Observed gender ratios with fitted curves (scatter + lines)."""
    groups = []
    for group, curve in curves.items():
        params = curve.params if isinstance(curve, RatioCurve) else curve
        years, shares = curve_series(params)
        pts = [p for p in points if p.group is group]
        groups.append({
            "group": group.value,
            "observed": {"year": [p.year for p in pts],
                         "ratio": [p.ratio for p in pts]},
            "fit": {"year": years.tolist(),
                    "ratio": [float(v) for v in shares]},
        })
    return {
        "schema": "figure/1",
        "id": "fig2",
        "kind": "scatter_with_fits",
        "title": "Female share of senior faculty by discipline group",
        "x_label": "year",
        "y_label": "female share",
        "groups": groups,
    }


def _window_density(samples: np.ndarray, grid: np.ndarray) -> list[float]:
    """KDE values normalised to unit trapezoid mass over the grid.

    The prior keeps roughly 1% of its mass beyond the displayed window,
    so each curve is rescaled to integrate to 1 on the grid shown.
    """
    dens = kde_density(samples, grid)
    return [float(v) for v in dens / np.trapezoid(dens, grid)]


def fig3_payload(prior: PriorDraws, draws: PosteriorDraws, delta: int,
                 grid: np.ndarray = DENSITY_GRID) -> dict:
    """Prior and per-field posterior densities of the bias factor."""
    alpha_names = [n for n in draws.param_names if n.startswith("alpha_")]
    pooled_prior = np.concatenate([
        prior.draws[:, 1 + j].ravel()
        for j in range(len(prior.param_names) - 1)
    ])
    series = [{
        "name": "prior",
        "density": _window_density(pooled_prior, grid),
    }]
    for name in alpha_names:
        j = draws.param_names.index(name)
        pooled = draws.draws[:, :, j].ravel()
        series.append({
            "name": name.removeprefix("alpha_"),
            "density": _window_density(pooled, grid),
        })
    return {
        "schema": "figure/1",
        "id": "fig3",
        "kind": "densities",
        "title": f"Bias factor: prior and posteriors (lag {delta})",
        "x_label": "bias factor",
        "y_label": "density",
        "delta": delta,
        "grid": [float(v) for v in grid],
        "series": series,
    }


def fig4_payload(rows: list[SweepRow]) -> dict:
    """Probability the bias factor reaches 1, per field, across lags."""
    deltas = sorted({row.delta for row in rows})
    by_field = {f: {row.delta: row.prob_ge_one for row in rows if row.field is f}
                for f in Field}
    series = []
    for f in Field:
        if not by_field[f]:
            continue
        series.append({
            "name": f.value,
            "values": [by_field[f][d] for d in deltas],
        })
    return {
        "schema": "figure/1",
        "id": "fig4",
        "kind": "lines",
        "title": "Probability awards match the candidate pool",
        "x_label": "nomination lag (years)",
        "y_label": "P(bias factor >= 1)",
        "x": deltas,
        "series": series,
    }
