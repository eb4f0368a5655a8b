"""Command-line interface: fit models on CSV data and reproduce simulation
study tables.

Exit codes: 0 success, 2 malformed input (flags, CSV, scenario), 3 solver
failure. All randomness flows from --seed; output is deterministic for a
fixed command line.
"""

import argparse
import json
import os
import sys

import numpy as np

from .het import HetQrConfig, fit_hetqr, make_weights, make_weights_highdim
from .lp_core import SolverFailure
from .model import (
    QuantileGrid,
    SparsityPattern,
    ZERO_TOL,
    load_dataset_csv,
    stacked_loss,
)
from .qr_fit import fit_qr, fit_qr_alasso, fit_qr_lasso
from .simgen import Scenario, run_study
from .simgen.scenarios import CORR_KINDS, ERROR_DISTS, KINDS
from .simgen.study import METHODS, StudyConfig
from .tuning import default_lambda_grid, tune_cv, tune_validation

SCHEMA_VERSION = 1


class CliError(Exception):
    """User-input problem; maps to exit code 2."""


def _parse_floats(text, what):
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise CliError(f"could not parse {what}: {text!r}") from None
    if not values:
        raise CliError(f"empty {what}")
    return values


def _build_parser():
    parser = argparse.ArgumentParser(prog="hetqr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model on a CSV dataset")
    fit.add_argument("--data", required=True, help="CSV with header; first column y")
    fit.add_argument("--taus", default="0.25,0.5,0.75", help="comma-separated quantile levels")
    fit.add_argument("--pis", default=None, help="comma-separated per-level loss weights")
    fit.add_argument("--method", required=True, choices=METHODS)
    fit.add_argument("--lambda", dest="lam", type=float, default=None, help="tuning parameter")
    fit.add_argument("--tune", default=None, help="'cv:K' or 'valid:<csv>' instead of --lambda")
    fit.add_argument("--lambda-grid", default=None, help="comma-separated candidate lambdas")
    fit.add_argument("--seed", type=int, default=0, help="fold seed for --tune cv")
    fit.add_argument("--zero-tol", type=float, default=ZERO_TOL)
    fit.add_argument("--out", default=None, help="write the fit report as JSON")

    sim = sub.add_parser("simulate", help="run a Monte-Carlo study")
    sim.add_argument("--config", default=None, help="key=value file with defaults for the flags below")
    sim.add_argument("--scenario", choices=KINDS)
    sim.add_argument("--n", type=int, default=500)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--methods", default="qr,qr-lasso,qr-alasso,hetqr")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--error-dist", choices=ERROR_DISTS, default=None)
    sim.add_argument("--corr", choices=CORR_KINDS, default="ar")
    sim.add_argument("--rho", type=float, default=0.5)
    sim.add_argument("--blocks", type=int, default=None)
    sim.add_argument("--lambda-grid", default=None)
    sim.add_argument("--valid-mult", type=int, default=10)
    sim.add_argument("--test-mult", type=int, default=100)
    sim.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sim.add_argument("--out", default=None, help="directory for study.csv/study.txt outputs")
    return parser


def _fitter_for(method, data, grid):
    """Per-lambda fitting callable for tuning and final fits."""
    if method == "qr-lasso":
        return fit_qr_lasso
    if method == "qr-alasso":
        return lambda tr, g, lam: fit_qr_alasso(tr, g, lam)
    if method == "hetqr":
        if data.n > data.p:
            base = make_weights(data, grid)
            return lambda tr, g, lam: fit_hetqr(tr, g, base.with_lambda(lam), HetQrConfig(lambda_n=lam))
        def two_stage(tr, g, lam):
            cfg = HetQrConfig(lambda_n=lam)
            return fit_hetqr(tr, g, make_weights_highdim(tr, g, cfg), cfg)
        return two_stage
    raise CliError(f"method {method} takes no tuning parameter")


def _choose_lambda(args, data, grid):
    if args.method == "qr":
        return 0.0, None
    if (args.lam is None) == (args.tune is None):
        raise CliError("exactly one of --lambda or --tune is required for this method")
    if args.lam is not None:
        if args.lam < 0:
            raise CliError("--lambda must be nonnegative")
        return args.lam, None
    lambdas = (
        _parse_floats(args.lambda_grid, "--lambda-grid")
        if args.lambda_grid
        else default_lambda_grid(data.n)
    )
    fitter = _fitter_for(args.method, data, grid)
    mode = args.tune
    if mode.startswith("cv:"):
        try:
            k = int(mode[3:])
        except ValueError:
            raise CliError(f"bad --tune value {mode!r}") from None
        result = tune_cv(data, grid, lambdas, k, args.seed, fitter)
    elif mode.startswith("valid:"):
        valid = load_dataset_csv(mode[6:])
        if valid.p != data.p:
            raise CliError("validation CSV has a different covariate count")
        result = tune_validation(data, valid, grid, lambdas, fitter)
    else:
        raise CliError(f"bad --tune value {mode!r} (use cv:K or valid:<csv>)")
    return result.best_lambda, result


def _coef_table(coef, pattern, taus, names):
    width = max(12, max((len(n) for n in names), default=0) + 2)
    head = "".join(f"tau={t:<9g}" for t in taus)
    lines = [" " * width + head]
    vals = "".join(f"{v:<13.4g}" for v in coef.intercepts)
    lines.append("(intercept)".ljust(width) + vals)
    for j, name in enumerate(names):
        cells = []
        for m in range(len(taus)):
            if pattern.active[m, j]:
                cells.append(f"{coef.slopes[m, j]:<13.4g}")
            else:
                cells.append(" " * 13)  # zero estimates are left blank
        lines.append(name.ljust(width) + "".join(cells))
    return "\n".join(line.rstrip() for line in lines)


def _cmd_fit(args):
    data = load_dataset_csv(args.data)
    taus = _parse_floats(args.taus, "--taus")
    pis = _parse_floats(args.pis, "--pis") if args.pis else None
    try:
        grid = QuantileGrid(taus=np.array(taus), pis=None if pis is None else np.array(pis))
    except ValueError as exc:
        raise CliError(str(exc)) from None

    lam, tuning = _choose_lambda(args, data, grid)

    if args.method == "qr":
        coef = fit_qr(data, grid)
        trace, iterations, converged, xi = [stacked_loss(data, grid, coef)], 1, True, None
    elif args.method == "hetqr":
        report = _fitter_for("hetqr", data, grid)(data, grid, lam)
        coef = report.coef
        trace = list(report.objective_trace)
        iterations, converged = report.iterations, report.converged
        xi = list(report.xi)
    else:
        coef = _fitter_for(args.method, data, grid)(data, grid, lam)
        trace, iterations, converged, xi = [stacked_loss(data, grid, coef)], 1, True, None

    pattern = (
        SparsityPattern.full(grid.m, data.p)
        if args.method == "qr"
        else SparsityPattern.from_coef(coef, args.zero_tol)
    )
    names = list(data.feature_names or (f"z{j+1}" for j in range(data.p)))
    report_json = {
        "schema": SCHEMA_VERSION,
        "method": args.method,
        "taus": taus,
        "pis": pis if pis is not None else [1.0] * len(taus),
        "lambda": lam,
        "feature_names": names,
        "intercepts": [float(v) for v in coef.intercepts],
        "slopes": [[float(v) for v in row] for row in coef.slopes],
        "pattern": [[bool(v) for v in row] for row in pattern.active],
        "objective": stacked_loss(data, grid, coef),
        "objective_trace": [float(v) for v in trace],
        "iterations": iterations,
        "converged": converged,
        "xi": xi,
    }
    if tuning is not None:
        report_json["tuning"] = {
            "method": tuning.method,
            "lambdas": [float(v) for v in tuning.lambdas],
            "scores": [float(v) for v in tuning.scores],
        }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report_json, fh, indent=2)
            fh.write("\n")
    print(f"method={args.method} lambda={lam:g} objective={report_json['objective']:.6f}")
    print(_coef_table(coef, pattern, taus, names))
    return 0


def _read_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


_CONFIG_KEYS = {
    "scenario": str,
    "n": int,
    "reps": int,
    "methods": str,
    "seed": int,
    "error_dist": str,
    "corr": str,
    "rho": float,
    "blocks": int,
    "lambda_grid": str,
    "valid_mult": int,
    "test_mult": int,
    "jobs": int,
}


def _cmd_simulate(args, argv):
    if args.config:
        file_vals = _read_config_file(args.config)
        for key, conv in _CONFIG_KEYS.items():
            flag = "--" + key.replace("_", "-")
            if key in file_vals and not any(a == flag or a.startswith(flag + "=") for a in argv):
                try:
                    setattr(args, key, conv(file_vals[key]))
                except ValueError:
                    raise CliError(f"bad value for {key} in {args.config}") from None
    if not args.scenario:
        raise CliError("--scenario is required (flag or config file)")
    try:
        scenario = Scenario(
            kind=args.scenario,
            n=args.n,
            seed=args.seed,
            error_dist=args.error_dist,
            corr=args.corr,
            rho=args.rho,
            blocks=args.blocks,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise CliError(f"unknown method {m!r}; choose from {METHODS}")

    grid = QuantileGrid(taus=np.array([0.25, 0.5, 0.75]))
    lambdas = _parse_floats(args.lambda_grid, "--lambda-grid") if args.lambda_grid else None
    config = StudyConfig(
        lambdas=lambdas,
        valid_multiplier=args.valid_mult,
        test_multiplier=args.test_mult,
        jobs=max(1, args.jobs),
    )
    result = run_study(scenario, methods, args.reps, grid, config)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)

    text = result.to_text()
    print(text, end="")
    if result.failures:
        print(
            f"warning: {len(result.failures)} of {args.reps * len(result.methods)} fits failed "
            "and were excluded from the means",
            file=sys.stderr,
        )
    if not result.rows:
        print("error: every replication failed", file=sys.stderr)
        return 3

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "study.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(os.path.join(args.out, "study.csv"), "w", encoding="utf-8") as fh:
            fh.write(result.to_csv())
        with open(os.path.join(args.out, "replications.csv"), "w", encoding="utf-8") as fh:
            fh.write(result.reps_csv())
        cfg_lines = [
            f"scenario={scenario.kind}",
            f"n={scenario.n}",
            f"reps={args.reps}",
            f"methods={','.join(methods)}",
            f"seed={args.seed}",
            f"corr={scenario.corr}",
            f"error-dist={scenario.effective_error_dist}",
            f"rho={scenario.rho}",
            f"blocks={scenario.effective_blocks}",
            f"valid-mult={args.valid_mult}",
            f"test-mult={args.test_mult}",
            f"jobs={args.jobs}",
        ]
        if lambdas is not None:
            cfg_lines.append("lambda-grid=" + ",".join(f"{v:g}" for v in lambdas))
        with open(os.path.join(args.out, "config.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(cfg_lines) + "\n")
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        return _cmd_simulate(args, argv)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverFailure, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
