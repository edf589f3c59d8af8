"""Command-line pipeline around the bias model.

Subcommands cover the whole analysis with file-based interchange:

* ``validate``   check the input tables and their pinned totals
* ``fit-ratios`` fit the gender-ratio curves, write ``curves.json``
* ``prior``      draw from the prior, write ``prior_draws.csv``
* ``sample``     run the sampler, write ``draws.json``, ``summary.json``
                 and the fig1/fig2/fig3 data files
* ``sweep``      rerun over a lag range, write ``sweep.csv`` and
                 ``fig4.json``
* ``figures``    reassemble all fig-data files from existing artifacts

Every artifact is written atomically and every run directory carries a
``manifest.json`` with the full config and SHA-256 of inputs and
outputs. Outputs contain no timestamps: identical invocations produce
byte-identical files.

Exit codes: 0 success, 1 usage error, 2 input/data error, 3 inference
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .data import (DataError, bundled_laureates_path, bundled_ratios_path,
                   check_expected_totals, file_sha256, load_laureates,
                   load_ratios, summarize)
from .hmc import HmcConfig, SamplerError, compute_diagnostics, sample
from .model import PosteriorDensity, prepare
from .ratios import FitError, fit_all

_FIG3_PRIOR_DRAWS = 20000

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFERENCE = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _update_manifest(out: Path, command: str, config: dict,
                     inputs: dict, artifacts: list[Path]) -> None:
    manifest_path = out / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            manifest = {}
    manifest[command] = {
        "config": config,
        "inputs": inputs,
        "artifacts": {p.name: file_sha256(p) for p in artifacts},
    }
    analysis.write_atomic(manifest_path, analysis.json_text(manifest))


def _load_inputs(args):
    laureates_path = Path(args.laureates)
    ratios_path = Path(args.ratios)
    records = load_laureates(laureates_path)
    points = load_ratios(ratios_path)
    checksums = {
        "laureates_sha256": file_sha256(laureates_path),
        "ratios_sha256": file_sha256(ratios_path),
    }
    return records, points, checksums


def _hmc_config(args) -> HmcConfig:
    return HmcConfig(
        n_chains=args.chains,
        n_warmup=args.warmup,
        n_draws=args.draws,
        target_accept=args.target_accept,
        leapfrog_steps=args.leapfrog_steps,
        seed=args.seed,
    )


def _config_dict(config: HmcConfig) -> dict:
    return {
        "chains": config.n_chains,
        "warmup": config.n_warmup,
        "draws": config.n_draws,
        "target_accept": config.target_accept,
        "leapfrog_steps": config.leapfrog_steps,
        "seed": config.seed,
    }


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_validate(args) -> int:
    records, points, _ = _load_inputs(args)
    summary = summarize(records)
    for f, n in summary.awards_by_field.items():
        print(f"{f.value:10s} {n:4d} laureates, {summary.female_by_field[f]:2d} female")
    print(f"{summary.total_awards} laureates, {summary.total_female} female")
    n_groups = len({p.group for p in points})
    print(f"ratio points: {len(points)} across {n_groups} groups")
    check_expected_totals(summary)
    print("ok")
    return EXIT_OK


def _cmd_fit_ratios(args) -> int:
    _, points, checksums = _load_inputs(args)
    curves = fit_all(points)
    out = Path(args.out)
    from .ratios import curves_payload

    path = out / "curves.json"
    analysis.write_atomic(path, analysis.json_text(curves_payload(curves, points)))
    for group, curve in curves.items():
        p = curve.params
        print(f"{group.value:8s} ceiling={p.ceiling:.4f} "
              f"steepness={p.steepness:.5f} midpoint={p.midpoint:.2f} "
              f"rms={curve.rms_residual:.2e}")
    _update_manifest(out, "fit-ratios", {}, checksums, [path])
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_prior(args) -> int:
    records, points, checksums = _load_inputs(args)
    curves = fit_all(points)
    data = prepare(records, curves, args.delta)
    prior = analysis.sample_prior(data, args.draws, args.seed)
    out = Path(args.out)

    lines = [",".join(prior.param_names)]
    for row in prior.draws:
        lines.append(",".join(f"{v:.8f}" for v in row))
    path = out / "prior_draws.csv"
    analysis.write_atomic(path, "\n".join(lines) + "\n")

    alphas = prior.draws[:, 1:]
    print(f"prior draws: {args.draws} (delta={args.delta}, seed={args.seed})")
    print(f"mean(alpha)={alphas.mean():.4f} sd(alpha)={alphas.std(ddof=1):.4f} "
          f"rejection={prior.rejection_fraction:.4f}")
    config = {"delta": args.delta, "draws": args.draws, "seed": args.seed}
    _update_manifest(out, "prior", config, checksums, [path])
    print(f"wrote {path}")
    return EXIT_OK


def _summary_payload(summaries, draws, data, config, checksums) -> dict:
    return {
        "schema": "posterior-summary/1",
        "delta": data.delta,
        "seed": config.seed,
        "config": _config_dict(config),
        "inputs": checksums,
        "parameters": {
            s.name: {
                "mean": s.mean,
                "sd": s.sd,
                "quantiles": s.quantiles,
                "prob_ge_one": s.prob_ge_one,
                "ess": s.ess,
                "rhat": s.rhat,
            }
            for s in summaries
        },
        "sampler": {
            "step_size": [float(v) for v in draws.step_size],
            "acceptance": [float(v) for v in draws.acceptance],
            "divergences": [int(v) for v in draws.divergences],
        },
    }


def _draws_payload(draws, data, diag) -> dict:
    return {
        "schema": "posterior-draws/1",
        "delta": data.delta,
        "seed": draws.config.seed,
        "param_names": list(draws.param_names),
        "alpha_max": {f.value: float(a)
                      for f, a in zip(data.fields, data.alpha_max)},
        "chains": [[[float(v) for v in row] for row in chain]
                   for chain in draws.draws],
        "diagnostics": {
            "rhat": {n: float(v) for n, v in zip(diag.param_names, diag.rhat)},
            "ess": {n: float(v) for n, v in zip(diag.param_names, diag.ess)},
        },
        "sampler": {
            "step_size": [float(v) for v in draws.step_size],
            "acceptance": [float(v) for v in draws.acceptance],
            "divergences": [int(v) for v in draws.divergences],
        },
    }


def _cmd_sample(args) -> int:
    records, points, checksums = _load_inputs(args)
    curves = fit_all(points)
    data = prepare(records, curves, args.delta)
    config = _hmc_config(args)
    out = Path(args.out)
    try:
        draws = sample(PosteriorDensity(data), config)
    except SamplerError as e:
        failure = out / "failure.json"
        analysis.write_atomic(failure, analysis.json_text({
            "command": "sample",
            "error": str(e),
            "config": _config_dict(config),
            "delta": args.delta,
        }))
        print(f"sampler aborted: {e} (details: {failure})", file=sys.stderr)
        return EXIT_INFERENCE
    diag = compute_diagnostics(draws)
    summaries = analysis.summarize_posterior(draws, diag)
    prior = analysis.sample_prior(data, _FIG3_PRIOR_DRAWS, args.seed)

    written = []
    for name, payload in [
        ("draws.json", _draws_payload(draws, data, diag)),
        ("summary.json", _summary_payload(summaries, draws, data, config, checksums)),
    ]:
        path = out / name
        analysis.write_atomic(path, analysis.json_text(payload))
        written.append(path)
    written += analysis.emit_figure_data(out, records, points, curves,
                                         prior, draws, args.delta)

    print(f"delta={args.delta} seed={args.seed} chains={config.n_chains} "
          f"warmup={config.n_warmup} draws={config.n_draws}")
    print(f"{'parameter':18s} {'mean':>7s} {'sd':>7s} {'P(>=1)':>8s} "
          f"{'ESS':>7s} {'R-hat':>7s}")
    for s in summaries:
        print(f"{s.name:18s} {s.mean:7.4f} {s.sd:7.4f} {s.prob_ge_one:8.5f} "
              f"{s.ess:7.0f} {s.rhat:7.4f}")
    config_meta = {**_config_dict(config), "delta": args.delta}
    _update_manifest(out, "sample", config_meta, checksums, written)
    print("wrote " + " ".join(str(p) for p in written))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    records, points, checksums = _load_inputs(args)
    curves = fit_all(points)
    config = _hmc_config(args)
    out = Path(args.out)
    try:
        rows = analysis.delta_sweep(records, curves, args.delta_min,
                                    args.delta_max, config,
                                    workers=args.workers)
    except SamplerError as e:
        failure = out / "failure.json"
        analysis.write_atomic(failure, analysis.json_text({
            "command": "sweep",
            "error": str(e),
            "config": _config_dict(config),
            "delta_min": args.delta_min,
            "delta_max": args.delta_max,
        }))
        print(f"sampler aborted: {e} (details: {failure})", file=sys.stderr)
        return EXIT_INFERENCE

    csv_path = out / "sweep.csv"
    analysis.write_atomic(csv_path, analysis.sweep_csv_text(rows))
    fig_path = out / "fig4.json"
    analysis.write_atomic(fig_path, analysis.json_text(analysis.fig4_payload(rows)))

    worst = max(rows, key=lambda r: r.prob_ge_one)
    print(f"sweep delta {args.delta_min}..{args.delta_max}: {len(rows)} rows")
    print(f"max P(alpha>=1) = {worst.prob_ge_one:.4f} "
          f"({worst.field.value}, delta={worst.delta})")
    config_meta = {**_config_dict(config), "delta_min": args.delta_min,
                   "delta_max": args.delta_max, "workers": args.workers}
    _update_manifest(out, "sweep", config_meta, checksums, [csv_path, fig_path])
    print(f"wrote {csv_path} {fig_path}")
    return EXIT_OK


def _cmd_figures(args) -> int:
    records, points, checksums = _load_inputs(args)
    curves = fit_all(points)
    out = Path(args.out)

    draws_path = out / "draws.json"
    if not draws_path.exists():
        print(f"missing artifact: {draws_path} (run `lagbias sample` first)",
              file=sys.stderr)
        return EXIT_DATA
    sweep_path = out / "sweep.csv"
    if not sweep_path.exists():
        print(f"missing artifact: {sweep_path} (run `lagbias sweep` first)",
              file=sys.stderr)
        return EXIT_DATA

    stored = json.loads(draws_path.read_text(encoding="utf-8"))
    from .data import Field
    from .hmc import PosteriorDraws

    delta = int(stored["delta"])
    seed = int(stored["seed"])
    chains = np.asarray(stored["chains"], dtype=float)
    draws = PosteriorDraws(
        draws=chains,
        param_names=tuple(stored["param_names"]),
        step_size=np.asarray(stored["sampler"]["step_size"]),
        acceptance=np.asarray(stored["sampler"]["acceptance"]),
        divergences=np.asarray(stored["sampler"]["divergences"], dtype=int),
    )
    data = prepare(records, curves, delta)
    prior = analysis.sample_prior(data, _FIG3_PRIOR_DRAWS, seed)

    sweep_rows = []
    for i, line in enumerate(sweep_path.read_text(encoding="utf-8").splitlines()):
        if i == 0 or not line:
            continue
        d, field, prob, mean = line.split(",")
        sweep_rows.append(analysis.SweepRow(
            delta=int(d), field=Field(field),
            prob_ge_one=float(prob), mean_alpha=float(mean),
        ))

    written = analysis.emit_figure_data(out, records, points, curves,
                                        prior, draws, delta,
                                        sweep_rows=sweep_rows)
    _update_manifest(out, "figures", {"delta": delta, "seed": seed},
                     checksums, written)
    print("wrote " + " ".join(str(p) for p in written))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lagbias",
                     description="Gender bias in Nobel awards under a "
                                 "nomination-lag model.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    data_flags = _Parser(add_help=False)
    data_flags.add_argument("--laureates", default=str(bundled_laureates_path()),
                            help="laureate counts CSV (default: bundled)")
    data_flags.add_argument("--ratios", default=str(bundled_ratios_path()),
                            help="gender-ratio CSV (default: bundled)")

    out_flags = _Parser(add_help=False)
    out_flags.add_argument("--out", default=os.environ.get("LAGBIAS_OUT", "out"),
                           help="output directory (default: $LAGBIAS_OUT or ./out)")

    sampler_flags = _Parser(add_help=False)
    sampler_flags.add_argument("--chains", type=int, default=4)
    sampler_flags.add_argument("--warmup", type=int, default=1000)
    sampler_flags.add_argument("--draws", type=int, default=2000)
    sampler_flags.add_argument("--target-accept", type=float, default=0.8)
    sampler_flags.add_argument("--leapfrog-steps", type=int, default=32)
    sampler_flags.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate", parents=[data_flags],
                       help="check inputs and pinned totals")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("fit-ratios", parents=[data_flags, out_flags],
                       help="fit ratio curves, write curves.json")
    p.set_defaults(func=_cmd_fit_ratios)

    p = sub.add_parser("prior", parents=[data_flags, out_flags],
                       help="draw from the prior, write prior_draws.csv")
    p.add_argument("--delta", type=int, default=10)
    p.add_argument("--draws", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_prior)

    p = sub.add_parser("sample", parents=[data_flags, out_flags, sampler_flags],
                       help="sample the posterior, write draws/summary/fig data")
    p.add_argument("--delta", type=int, default=10)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("sweep", parents=[data_flags, out_flags, sampler_flags],
                       help="rerun over a lag range, write sweep.csv and fig4")
    p.add_argument("--delta-min", type=int, default=0)
    p.add_argument("--delta-max", type=int, default=20)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel lag tasks (default: 1; results identical)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("figures", parents=[data_flags, out_flags],
                       help="rebuild fig-data files from existing artifacts")
    p.set_defaults(func=_cmd_figures)

    return parser


def _check_args(parser, args) -> None:
    checks = [
        ("delta", lambda v: v >= 0, "--delta must be >= 0"),
        ("delta_min", lambda v: v >= 0, "--delta-min must be >= 0"),
        ("chains", lambda v: v >= 1, "--chains must be >= 1"),
        ("warmup", lambda v: v >= 1, "--warmup must be >= 1"),
        ("draws", lambda v: v >= 1, "--draws must be >= 1"),
        ("leapfrog_steps", lambda v: v >= 1, "--leapfrog-steps must be >= 1"),
        ("target_accept", lambda v: 0.0 < v < 1.0,
         "--target-accept must lie in (0, 1)"),
        ("seed", lambda v: v >= 0, "--seed must be >= 0"),
        ("workers", lambda v: v >= 1, "--workers must be >= 1"),
    ]
    for name, ok, message in checks:
        if hasattr(args, name) and not ok(getattr(args, name)):
            parser.error(message)
    if hasattr(args, "delta_min") and args.delta_min > args.delta_max:
        parser.error("--delta-min must not exceed --delta-max")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_args(parser, args)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except FitError as e:
        print(f"fit failed: {e}", file=sys.stderr)
        return EXIT_INFERENCE


if __name__ == "__main__":
    sys.exit(main())
