"""Command-line interface.

Subcommands: simulate, fit-mode, fit-mcmc, filter, smooth, forecast,
evaluate, bench.  Inputs are delimiter-separated text with a header
row; outputs embed the package version, the fully resolved run
configuration, and the seed, so any output file can be reproduced
byte-for-byte by re-running its own embedded configuration.

Exit codes: 0 success, 2 input error, 3 numeric failure,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bench import (
    BenchError,
    cell_table,
    model_forecast_fn,
    out_of_sample_eval,
    run_design_cell,
)
from .filtering import FilterDivergedError, forecast_volatility, run_filter
from .inference import (
    HessianNotPDError,
    McmcConfig,
    McmcStuckError,
    OptimizerOptions,
    PriorSpec,
    TuningFailedError,
    default_start,
    posterior_mode,
    run_mcmc,
    tune_proposals,
)
from .model import (
    PARAM_NAMES,
    ReturnSeries,
    SimulationDesign,
    StaticParams,
    params_from_design,
    simulate,
)
from .smoothing import sample_smoothed_paths, smoothed_volatility_summary
from .special import RngStream

__all__ = ["main", "ingest", "IngestError", "ColumnMapping", "RunConfig"]

_GRID_PHI = (0.9, 0.95, 0.98)
_GRID_CV = (10.0, 1.0, 0.1)


class IngestError(ValueError):
    """Input file problem; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ColumnMapping:
    """How to read the input file: exactly one of return_col/price_col."""

    return_col: str | None = None
    price_col: str | None = None
    date_col: str | None = None
    delimiter: str = ","
    center: bool = True

    def __post_init__(self) -> None:
        if (self.return_col is None) == (self.price_col is None):
            raise ValueError("exactly one of return_col/price_col must be set")


def ingest(path: str, mapping: ColumnMapping) -> ReturnSeries:
    """Read prices or returns from a delimited text file.

    Prices become continuously compounded percentage returns
    100 ln(P_t / P_{t-1}); centering subtracts the sample mean and
    records it.  Missing or malformed values are rejected with their
    line number, as are non-positive prices.  Blank lines and `#`
    metadata lines are skipped, so subcommand output files feed
    straight back in; error line numbers stay physical.
    """
    col = mapping.return_col if mapping.return_col is not None else mapping.price_col
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        rows = []
        for line_no, text in enumerate(fh, start=1):
            stripped = text.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parsed = next(csv.reader([text], delimiter=mapping.delimiter))
            rows.append((line_no, parsed))
    if not rows:
        raise IngestError("empty file", line=1)

    header_no, header = rows[0]
    header = [h.strip() for h in header]
    if col not in header:
        raise IngestError(f"column {col!r} not found in header {header}", line=header_no)
    if mapping.date_col is not None and mapping.date_col not in header:
        raise IngestError(
            f"date column {mapping.date_col!r} not found in header", line=header_no
        )
    idx = header.index(col)

    raw = []
    for line_no, row in rows[1:]:
        if len(row) <= idx:
            raise IngestError(
                f"expected at least {idx + 1} fields, got {len(row)}", line=line_no
            )
        cell = row[idx].strip()
        if not cell:
            raise IngestError(f"missing value in column {col!r}", line=line_no)
        try:
            value = float(cell)
        except ValueError:
            raise IngestError(
                f"cannot parse {cell!r} as a number", line=line_no
            ) from None
        if not math.isfinite(value):
            raise IngestError(f"non-finite value {cell!r}", line=line_no)
        if mapping.price_col is not None and value <= 0.0:
            raise IngestError(f"non-positive price {cell!r}", line=line_no)
        raw.append(value)

    if mapping.price_col is not None:
        if len(raw) < 2:
            raise IngestError("need at least 2 prices to form returns")
        prices = np.asarray(raw)
        values = 100.0 * np.log(prices[1:] / prices[:-1])
    else:
        if len(raw) < 1:
            raise IngestError("need at least 1 return")
        values = np.asarray(raw)
    return ReturnSeries.from_returns(values, center=mapping.center)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved invocation, embedded in every output."""

    subcommand: str
    options: dict

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, **self.options}


def _fnum(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write(out_path, text: str) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit(args, config: RunConfig, columns, rows, scalars=None) -> None:
    scalars = scalars or {}
    if args.format == "json":
        doc = {
            "version": __version__,
            "config": config.to_dict(),
            "scalars": scalars,
            "columns": list(columns),
            "rows": [
                [float(v) if isinstance(v, (float, np.floating)) else v for v in row]
                for row in rows
            ],
        }
        _write(args.output, json.dumps(doc, sort_keys=True, indent=2) + "\n")
        return
    lines = [
        f"# gedsv-version: {__version__}",
        "# config: " + json.dumps(config.to_dict(), sort_keys=True),
    ]
    for key, val in scalars.items():
        val_s = _fnum(val) if isinstance(val, (int, float, np.floating)) else str(val)
        lines.append(f"# {key}: {val_s}")
    lines.append(args.delimiter.join(columns))
    for row in rows:
        lines.append(
            args.delimiter.join(
                _fnum(v) if isinstance(v, (int, float, np.integer, np.floating)) else str(v)
                for v in row
            )
        )
    _write(args.output, "\n".join(lines) + "\n")


def _config_from_args(args, skip=("func",)) -> RunConfig:
    options = {
        k: v for k, v in sorted(vars(args).items()) if k not in skip and k != "subcommand"
    }
    return RunConfig(args.subcommand, options)


def _ingest_from_args(args) -> ReturnSeries:
    mapping = ColumnMapping(
        return_col=args.return_col,
        price_col=args.price_col,
        date_col=args.date_col,
        delimiter=args.delimiter,
        center=not args.no_center,
    )
    return ingest(args.input, mapping)


def _resolve_params(args, series: ReturnSeries) -> tuple[StaticParams, dict]:
    """Explicit --alpha/--phi/--sigma-eta2/--r quadruple, or a posterior-mode
    fit on the ingested series when none are given."""
    given = [args.alpha, args.phi, args.sigma_eta2, args.r]
    if all(v is not None for v in given):
        return StaticParams(*given), {}
    if any(v is not None for v in given):
        raise IngestError("give all of --alpha/--phi/--sigma-eta2/--r or none")
    mode, converged, value = posterior_mode(
        series, PriorSpec.default(), default_start(series)
    )
    scalars = {
        "fitted": "posterior-mode",
        "fit_converged": str(bool(converged)).lower(),
        "fit_log_posterior": value,
    }
    for name, v in zip(PARAM_NAMES, mode.as_array()):
        scalars[f"fit_{name}"] = float(v)
    return mode, scalars


def _add_output_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    p.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="output format"
    )
    p.add_argument(
        "--delimiter", default=",", help="field delimiter for input and output"
    )
    p.add_argument("--seed", type=int, default=0, help="random seed")


def _add_input_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="input data file")
    p.add_argument("--return-col", default=None, help="name of the returns column")
    p.add_argument("--price-col", default=None, help="name of the price column")
    p.add_argument("--date-col", default=None, help="optional date column (unused)")
    p.add_argument(
        "--no-center",
        action="store_true",
        help="do not subtract the sample mean from returns",
    )


def _add_param_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--sigma-eta2", type=float, default=None)
    p.add_argument("--r", type=float, default=None)


def _cmd_simulate(args) -> int:
    design = SimulationDesign(
        phi=args.phi,
        cv=args.cv,
        expected_var=args.expected_var,
        r=args.r,
        n=args.n,
        seed=args.seed,
    )
    params = params_from_design(design)
    series, path = simulate(params, design.n, rng=RngStream(args.seed, 0))
    rows = [
        (t + 1, series.values[t], path.log_precision[t], float(path.volatility[t]))
        for t in range(design.n)
    ]
    scalars = {f"true_{n}": float(v) for n, v in zip(PARAM_NAMES, params.as_array())}
    _emit(
        args,
        _config_from_args(args),
        ("t", "y", "log_precision", "volatility"),
        rows,
        scalars,
    )
    return 0


def _cmd_fit_mode(args) -> int:
    series = _ingest_from_args(args)
    options = OptimizerOptions(
        maxiter=args.maxiter, gtol=args.gtol, fixed_r=args.fixed_r
    )
    mode, converged, value = posterior_mode(
        series, PriorSpec.default(), default_start(series), options
    )
    rows = [(name, float(v)) for name, v in zip(PARAM_NAMES, mode.as_array())]
    scalars = {
        "converged": str(bool(converged)).lower(),
        "log_posterior": value,
        "n": series.n,
        "original_mean": series.original_mean,
    }
    _emit(args, _config_from_args(args), ("parameter", "estimate"), rows, scalars)
    if not converged:
        sys.stderr.write("error: non-convergence: optimizer hit its iteration cap\n")
        return 4
    return 0


def _cmd_fit_mcmc(args) -> int:
    series = _ingest_from_args(args)
    mode, converged, _ = posterior_mode(
        series, PriorSpec.default(), default_start(series)
    )
    priors = PriorSpec.default()
    if args.tune:
        sd = tune_proposals(series, priors, mode, seed=args.seed)
    else:
        sd = tuple(float(s) for s in args.proposal_sd.split(","))
    config = McmcConfig(
        chains=args.chains,
        iterations=args.iterations,
        burn_in=args.burn_in,
        proposal_sd=sd,
        seed=args.seed,
    )
    samples = run_mcmc(series, priors, config, mode)
    lo, hi = samples.credible_interval(0.95)
    means = samples.values.mean(axis=0)
    rows = [
        (name, float(m), float(mu), float(l), float(h))
        for name, m, mu, l, h in zip(PARAM_NAMES, mode.as_array(), means, lo, hi)
    ]
    scalars = {
        "mode_converged": str(bool(converged)).lower(),
        "draws": samples.n_draws,
        "proposal_sd": ",".join(_fnum(s) for s in sd),
    }
    for name, rate in zip(PARAM_NAMES, samples.acceptance_rates):
        scalars[f"acceptance_{name}"] = float(rate)
    _emit(
        args,
        _config_from_args(args),
        ("parameter", "post_mode", "post_mean", "lower025", "upper975"),
        rows,
        scalars,
    )
    if not converged:
        sys.stderr.write("error: non-convergence: optimizer hit its iteration cap\n")
        return 4
    return 0


def _cmd_filter(args) -> int:
    series = _ingest_from_args(args)
    params, scalars = _resolve_params(args, series)
    out = run_filter(series, params)
    rows = [
        (
            t + 1,
            float(out.a_prior[t]),
            float(np.exp(out.log_b_prior[t])),
            float(out.a_post[t]),
            float(np.exp(out.log_b_post[t])),
            float(out.log_predictive[t]),
        )
        for t in range(out.n)
    ]
    scalars["total_loglik"] = out.total_loglik
    _emit(
        args,
        _config_from_args(args),
        ("t", "shape_prior", "rate_prior", "shape_post", "rate_post", "log_predictive"),
        rows,
        scalars,
    )
    return 0


def _cmd_smooth(args) -> int:
    series = _ingest_from_args(args)
    params, scalars = _resolve_params(args, series)
    out = run_filter(series, params)
    draws = sample_smoothed_paths(out, params, RngStream(args.seed, 0), args.draws)
    mean, lower, upper = smoothed_volatility_summary(draws)
    rows = [
        (t + 1, float(mean[t]), float(lower[t]), float(upper[t]))
        for t in range(series.n)
    ]
    _emit(
        args,
        _config_from_args(args),
        ("t", "mean", "lower95", "upper95"),
        rows,
        scalars,
    )
    return 0


def _cmd_forecast(args) -> int:
    series = _ingest_from_args(args)
    params, scalars = _resolve_params(args, series)
    out = run_filter(series, params)
    fc = forecast_volatility(out.last_posterior, params, args.horizon)
    rows = [
        (k + 1, float(fc.means[k]), float(fc.lower95[k]), float(fc.upper95[k]))
        for k in range(fc.horizon)
    ]
    _emit(
        args,
        _config_from_args(args),
        ("horizon", "mean", "lower95", "upper95"),
        rows,
        scalars,
    )
    return 0


def _cmd_evaluate(args) -> int:
    series = _ingest_from_args(args)
    options = OptimizerOptions(fixed_r=args.fixed_r)
    fn = model_forecast_fn(options=options)
    score_srmse, score_mae = out_of_sample_eval(series, fn, args.k_max)
    rows = [(score_srmse, score_mae)]
    _emit(args, _config_from_args(args), ("srmse", "mae"), rows, {"folds": args.k_max})
    return 0


def _cmd_bench(args) -> int:
    cells = []
    if args.full_grid:
        grid = [(p, c) for p in _GRID_PHI for c in _GRID_CV]
    else:
        grid = [(args.phi, args.cv)]
    for phi, cv in grid:
        design = SimulationDesign(
            phi=phi,
            cv=cv,
            expected_var=args.expected_var,
            r=args.r,
            n=args.n,
            replications=args.replications,
            seed=args.seed,
        )
        cells.append(
            run_design_cell(design, fit_r_free=not args.fix_r, workers=args.workers)
        )
    table = cell_table(cells, delimiter=args.delimiter)
    header, *data_lines = table.strip().split("\n")
    rows = [line.split(args.delimiter) for line in data_lines]
    _emit(args, _config_from_args(args), header.split(args.delimiter), rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gedsv",
        description="GED stochastic volatility model: simulate, fit, filter, "
        "smooth, forecast, evaluate, bench.",
    )
    parser.add_argument("--version", action="version", version=f"gedsv {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="simulate a series from a design cell")
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--cv", type=float, required=True)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--expected-var", type=float, default=0.0009)
    _add_output_options(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit-mode", help="posterior-mode fit")
    _add_input_options(p)
    p.add_argument("--fixed-r", type=float, default=None)
    p.add_argument("--maxiter", type=int, default=500)
    p.add_argument("--gtol", type=float, default=1e-6)
    _add_output_options(p)
    p.set_defaults(func=_cmd_fit_mode)

    p = sub.add_parser("fit-mcmc", help="Metropolis-Hastings posterior sample")
    _add_input_options(p)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=4000)
    p.add_argument(
        "--proposal-sd",
        default="0.08,0.015,0.06,0.18",
        help="four comma-separated proposal standard deviations",
    )
    p.add_argument("--tune", action="store_true", help="tune proposals first")
    _add_output_options(p)
    p.set_defaults(func=_cmd_fit_mcmc)

    p = sub.add_parser("filter", help="run the forward filter")
    _add_input_options(p)
    _add_param_options(p)
    _add_output_options(p)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("smooth", help="smoothed volatility band")
    _add_input_options(p)
    _add_param_options(p)
    p.add_argument("--draws", type=int, default=1000)
    _add_output_options(p)
    p.set_defaults(func=_cmd_smooth)

    p = sub.add_parser("forecast", help="multi-step volatility forecast")
    _add_input_options(p)
    _add_param_options(p)
    p.add_argument("--horizon", type=int, default=5)
    _add_output_options(p)
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("evaluate", help="leave-last-k out-of-sample scores")
    _add_input_options(p)
    p.add_argument("--k-max", type=int, default=5)
    p.add_argument("--fixed-r", type=float, default=None)
    _add_output_options(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench", help="simulation-study cells")
    p.add_argument("--phi", type=float, default=0.95)
    p.add_argument("--cv", type=float, default=1.0)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--expected-var", type=float, default=0.0009)
    p.add_argument("--replications", type=int, default=50)
    p.add_argument("--fix-r", action="store_true", help="Gaussian fit (r pinned at 2)")
    p.add_argument("--full-grid", action="store_true", help="all nine (phi, cv) cells")
    p.add_argument("--workers", type=int, default=1)
    _add_output_options(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IngestError as exc:
        sys.stderr.write(f"error: input: {exc}\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: input: {exc}\n")
        return 2
    except (FilterDivergedError, HessianNotPDError, BenchError, McmcStuckError,
            TuningFailedError, FloatingPointError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"error: numeric: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
