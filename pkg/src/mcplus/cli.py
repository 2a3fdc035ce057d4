"""Command-line interface.

Design matrices are read as CSV with one observation per row. Exit codes:
0 success, 1 input error, 2 step cap reached, 3 stalled path.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    SrcParams,
    gamma_threshold,
    kstar,
    lambda_univ,
    ptilde,
    ptilde_residual,
    sparsity_caps,
    src_probe,
)
from .errors import InputError, LambdaNotReached, MCPlusError
from .estimator import FIRST_REACH, SPARSEST, beta_at_lambda
from .linalg import PIVOT_RTOL, TOL_SOLVE, GramView, RegressionData, standardize_columns
from .path import PERFECT_FIT, STALLED, STEP_CAP, PathOptions, compute_path
from .pathdoc import metadata, parse, serialize
from .penalty import make_penalty
from .risk import cp_hat, df_hat, lse_sigma2, sigma2_from_beta, sigma_hat
from .sim import ExperimentConfig, long_csv, replications_json, run_experiment, summary_csv

EXIT_OK, EXIT_INPUT, EXIT_STEP_CAP, EXIT_STALLED = 0, 1, 2, 3
THREADS_ENV = "MCPLUS_THREADS"


def fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def read_csv_matrix(path: str, header: bool = False) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        for lineno, row in enumerate(reader, start=2 if header else 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            if rows and len(vals) != len(rows[0]):
                raise InputError(f"{path}:{lineno}: expected {len(rows[0])} fields, found {len(vals)}")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    M = np.array(rows, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InputError(f"{path}: non-finite values")
    return M


def load_data(args, standardize: bool) -> RegressionData:
    X = read_csv_matrix(args.x, args.header)
    y = read_csv_matrix(args.y, args.header)
    if y.ndim == 2 and y.shape[1] != 1:
        if y.shape[0] == 1:
            y = y.T
        else:
            raise InputError("y must be a single column")
    y = y.ravel()
    if y.shape[0] != X.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} values")
    data = RegressionData(X, y)
    return standardize_columns(data) if standardize else data


def _status_code(termination: str) -> int:
    return {STEP_CAP: EXIT_STEP_CAP, STALLED: EXIT_STALLED}.get(termination, EXIT_OK)


def cmd_fit(args) -> int:
    data = load_data(args, args.standardize)
    penalty = make_penalty(args.penalty, args.gamma)
    opts = PathOptions(k_max=args.kmax, allow_unstandardized=not args.standardize)
    path = compute_path(data, penalty, opts)
    text = serialize(path, n=data.n, scales=data.scales().tolist(), standardized=data.standardized)
    if args.out:
        Path(args.out).write_text(text)
    elif args.lam is None:
        sys.stdout.write(text)
    if path.termination != PERFECT_FIT:
        print(f"path terminated: {path.termination}: {path.message}", file=sys.stderr)
    if args.lam is not None:
        try:
            beta = beta_at_lambda(path, args.lam, args.rule)
        except LambdaNotReached as exc:
            print(str(exc), file=sys.stderr)
            return _status_code(path.termination) or EXIT_INPUT
        beta = data.to_original_scale(beta)
        out = csv.writer(sys.stdout, lineterminator="\n")
        out.writerow(["index", "value"])
        for j in np.flatnonzero(beta):
            out.writerow([int(j), fmt(beta[j])])
        return EXIT_OK
    return _status_code(path.termination)


def cmd_risk(args) -> int:
    text = Path(args.path).read_text()
    meta = metadata(text)
    path = parse(text)
    data = load_data(args, bool(meta.get("standardized")))
    if data.p != path.p:
        raise InputError(f"path has p={path.p} but X has {data.p} columns")
    penalty = path.penalty
    out = csv.writer(sys.stdout, lineterminator="\n")
    if args.sigma_hat:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            est = sigma_hat(data, path, penalty, r0=args.r0, lambda_star=args.lambda_star)
        out.writerow(["sigma_hat", "lambda_hat", "crossed"])
        out.writerow([fmt(est.sigma), fmt(est.lambda_hat), int(est.crossed)])
        return EXIT_OK
    lam = args.lam
    gram = GramView.from_data(data)
    beta = beta_at_lambda(path, lam, FIRST_REACH)
    df = df_hat(beta, lam, gram, penalty)
    s2_lam = sigma2_from_beta(data, beta, lam, penalty, gram)
    sigma2 = args.sigma2
    if sigma2 is None and data.n > data.p:
        sigma2 = lse_sigma2(data)
    cp = cp_hat(data, beta, lam, sigma2, penalty, gram=gram) if sigma2 is not None else math.nan
    out.writerow(["lambda", "df_hat", "cp_hat", "sigma2_lambda", "active"])
    out.writerow([fmt(lam), fmt(df), fmt(cp), fmt(s2_lam), int(np.count_nonzero(beta))])
    return EXIT_OK


def _print_rows(rows):
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["quantity", "value"])
    for k, v in rows:
        out.writerow([k, fmt(v)])


def cmd_bounds(args) -> int:
    q = args.quantity
    if q == "lambda-univ":
        _print_rows([("lambda_univ", lambda_univ(args.n, args.p, args.sigma))])
    elif q == "ptilde":
        val = ptilde(args.p, args.d0, args.m, args.eps)
        _print_rows([("ptilde", val), ("residual", ptilde_residual(val, args.p, args.d0, args.m, args.eps))])
    elif q == "kstar":
        _print_rows([("kstar", kstar(SrcParams(args.cstar, args.cupper, 1, args.kappa, args.alpha)))])
    elif q == "gamma-threshold":
        _print_rows([("gamma_threshold", gamma_threshold(args.cstar, args.cupper))])
    elif q == "sparsity-caps":
        d1, d5 = sparsity_caps(args.dstar, args.cstar, args.cupper, args.kappa, args.alpha)
        _print_rows([("d_thm1", d1), ("d_thm5", d5)])
    elif q == "src-probe":
        X = read_csv_matrix(args.x, args.header)
        data = standardize_columns(RegressionData(X, np.zeros(X.shape[0])))
        res = src_probe(data, args.d, args.gamma, args.reps, args.seed)
        _print_rows(list(res.summary().items()))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    if args.seed is not None:
        raw["seed"] = args.seed
    config = ExperimentConfig.from_dict(raw)
    parallel = args.parallel if args.parallel is not None else int(os.environ.get(THREADS_ENV, "1"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = run_experiment(config, parallel=max(1, parallel))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(summary_csv(result))
    (out / "replications.json").write_text(replications_json(result))
    (out / "long.csv").write_text(long_csv(result))
    sys.stdout.write(summary_csv(result))
    return EXIT_OK


class Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ver = f"mcplus {__version__} (tol_solve={TOL_SOLVE:g}, pivot_rtol={PIVOT_RTOL:g}, tol_knot=1e-09, tol_kkt=1e-09, tol_fit=1e-08)"
    parser = Parser(prog="mcplus", description="Exact MC+/SCAD/LASSO solution paths.")
    parser.add_argument("--version", action="version", version=ver)
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--x", required=True, help="design CSV, one observation per row")
        p.add_argument("--y", required=True, help="response CSV, one value per row")
        p.add_argument("--header", action="store_true", help="skip one header row in each CSV")

    fit = sub.add_parser("fit", help="trace a solution path")
    data_args(fit)
    fit.add_argument("--penalty", choices=["lasso", "mcp", "scad"], default="mcp")
    fit.add_argument("--gamma", type=float, default=None)
    fit.add_argument("--standardize", dest="standardize", action="store_true", default=True)
    fit.add_argument("--no-standardize", dest="standardize", action="store_false")
    fit.add_argument("--kmax", type=int, default=5000)
    fit.add_argument("--out", default=None, help="write the path document here")
    fit.add_argument("--lambda", dest="lam", type=float, default=None, help="also print beta(lambda) as CSV")
    fit.add_argument("--rule", choices=[FIRST_REACH, SPARSEST], default=FIRST_REACH)
    fit.set_defaults(func=cmd_fit)

    risk = sub.add_parser("risk", help="degrees of freedom, Cp and noise level along a path")
    risk.add_argument("--path", required=True)
    data_args(risk)
    grp = risk.add_mutually_exclusive_group(required=True)
    grp.add_argument("--lambda", dest="lam", type=float)
    grp.add_argument("--sigma-hat", action="store_true")
    risk.add_argument("--r0", type=float, default=1.0)
    risk.add_argument("--lambda-star", type=float, default=None)
    risk.add_argument("--sigma2", type=float, default=None, help="known noise variance for Cp")
    risk.set_defaults(func=cmd_risk)

    bounds = sub.add_parser("bounds", help="theoretical constants")
    bsub = bounds.add_subparsers(dest="quantity", required=True)
    b = bsub.add_parser("lambda-univ")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--sigma", type=float, default=1.0)
    b = bsub.add_parser("ptilde")
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--d0", type=int, required=True)
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--eps", type=float, default=1.0)
    b = bsub.add_parser("kstar")
    b.add_argument("--cstar", type=float, required=True)
    b.add_argument("--cupper", type=float, required=True)
    b.add_argument("--kappa", type=float, default=0.0)
    b.add_argument("--alpha", type=float, default=0.5)
    b = bsub.add_parser("gamma-threshold")
    b.add_argument("--cstar", type=float, required=True)
    b.add_argument("--cupper", type=float, required=True)
    b = bsub.add_parser("sparsity-caps")
    b.add_argument("--dstar", type=int, required=True)
    b.add_argument("--cstar", type=float, required=True)
    b.add_argument("--cupper", type=float, required=True)
    b.add_argument("--kappa", type=float, default=0.0)
    b.add_argument("--alpha", type=float, default=0.5)
    b = bsub.add_parser("src-probe")
    b.add_argument("--x", required=True)
    b.add_argument("--header", action="store_true")
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    bounds.set_defaults(func=cmd_bounds)

    sim = sub.add_parser("simulate", help="run a replicated experiment from a JSON config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    sim.add_argument("--parallel", type=int, default=None, help=f"worker processes (default ${THREADS_ENV} or 1)")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MCPlusError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
