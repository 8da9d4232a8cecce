"""Command-line interface: ``suecount {fit,scan,pmf,simulate,compare,surface}``.

Exit codes: 0 success, 1 input or usage error, 2 non-convergence.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .data import SCHEMAS, DatasetSchema, dataset_path, load_csv, read_table
from .distributions import SueParams, sue_pmf_table, vm_surface
from .exceptions import SueError
from .inference import fit, scan_gamma
from .optimize import OptimizerSettings
from .regression import RegressionSpec, predicted_relative_frequencies, sample_relative_frequencies
from .report import build_report, render_table
from .simulate import SimSettings, simulate_sue

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
FAMILY = {"poisson": "poisson", "gamma": "gamma_count", "sue": "sue"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _num(x):
    return f"{x:.17g}"


def _write_csv(rows, header, out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, float) else v for v in r])


def _resolve_data(args):
    """Dataset from ``--data`` (a path or a bundled name) and the column flags."""
    name = Path(args.data).stem.lower()
    if args.data in SCHEMAS:
        path = dataset_path(args.data)
    else:
        path = Path(args.data)
        if not path.is_file():
            raise UsageError(f"data file not found: {args.data}")
    if args.response is None and name in SCHEMAS:
        schema = SCHEMAS[name]
        if args.covariates:
            schema = DatasetSchema(schema.response_column, _split(args.covariates), args.t)
        else:
            schema = DatasetSchema(schema.response_column, schema.covariate_columns, args.t)
    else:
        if args.response is None:
            raise UsageError("--response is required for datasets without a bundled schema")
        if args.covariates:
            covs = _split(args.covariates)
        else:
            header, _ = read_table(path)
            covs = tuple(c for c in header if c != args.response)
        schema = DatasetSchema(args.response, covs, args.t)
    return load_csv(path, schema)


def _split(text):
    return tuple(c.strip() for c in text.split(",") if c.strip())


def _spec(args, family=None, gamma=None):
    return RegressionSpec(
        family=family or FAMILY[args.model],
        gamma_event=gamma or args.gamma,
        start_from=args.start,
        optimizer=OptimizerSettings(max_iters=args.max_iters, grad_tol=args.tol),
    )


def cmd_fit(args, out):
    ds = _resolve_data(args)
    result = fit(ds, _spec(args))
    report = build_report(result, ds, args.nmax)
    if args.format == "json":
        out.write(report.to_json() + "\n")
    elif args.format == "table":
        out.write(render_table(report) + "\n")
    else:
        _write_csv(report.coefficients, ["name", "estimate", "se"], out)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_scan(args, out):
    ds = _resolve_data(args)
    gammas = range(args.gamma_min, args.gamma_max + 1)
    scan = scan_gamma(ds, _spec(args, family="sue"), gammas)
    rows = [(r.gamma_event, r.loglik, r.aic, r.converged, "*" if r.gamma_event == scan.best_gamma else "")
            for r in scan.rows]
    if args.format == "json":
        payload = {
            "schema": 1,
            "best_gamma": scan.best_gamma,
            "rows": [
                {"gamma": g, "loglik": ll if math.isfinite(ll) else None, "aic": a if math.isfinite(a) else None,
                 "converged": c}
                for g, ll, a, c, _ in rows
            ],
        }
        out.write(json.dumps(payload, indent=2) + "\n")
    elif args.format == "table":
        out.write(f"{'gamma':>6}{'loglik':>12}{'AIC':>12}  best\n")
        for g, ll, a, c, mark in rows:
            out.write(f"{g:>6}{ll:>12.2f}{a:>12.2f}  {mark}\n")
    else:
        _write_csv(rows, ["gamma", "loglik", "aic", "converged", "best"], out)
    return EXIT_OK if all(r.converged for r in scan.rows) else EXIT_NONCONVERGED


def _params(args):
    try:
        return SueParams(args.rate, args.alpha, args.gamma, args.t)
    except SueError as exc:
        raise UsageError(str(exc)) from None


def cmd_pmf(args, out):
    table = sue_pmf_table(_params(args), args.nmax)
    rows = [(n, float(p), f, int(k)) for n, (p, f, k) in
            enumerate(zip(table.probs, table.form_used, table.terms_used))]
    _write_csv(rows, ["n", "probability", "form_used", "terms_used"], out)
    return EXIT_OK


def cmd_simulate(args, out):
    try:
        settings = SimSettings(args.paths, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    emp = simulate_sue(_params(args), settings)
    top = max(emp.counts_histogram)
    freq = emp.frequencies(top)
    rows = [(n, emp.counts_histogram.get(n, 0), float(freq[n])) for n in range(top + 1)]
    _write_csv(rows, ["n", "count", "frequency"], out)
    out.write(f"# paths={emp.paths} mean={_num(emp.mean)} variance={_num(emp.variance)} "
              f"truncated={emp.truncated_paths}\n")
    return EXIT_OK


def _model_spec(token, args):
    token = token.strip().lower()
    if token in ("poisson", "gamma"):
        return token, _spec(args, family=FAMILY[token])
    if token.startswith("sue"):
        g = int(token[3:] or args.gamma)
        return f"sue{g}", _spec(args, family="sue", gamma=g)
    raise UsageError(f"unknown model {token!r}; use poisson, gamma or sueN")


def cmd_compare(args, out):
    tokens = _split(args.models or "")
    if not tokens:
        raise UsageError("--models must name at least one model")
    specs = [_model_spec(t, args) for t in tokens]
    ds = _resolve_data(args)
    n_max = args.nmax if args.nmax is not None else int(np.max(ds.responses))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    freq_rows = [(n, "sample", float(p)) for n, p in enumerate(sample_relative_frequencies(ds, n_max))]
    moment_rows = []
    summary = {}
    status = EXIT_OK
    for label, spec in specs:
        try:
            res = fit(ds, spec)
        except (SueError, ArithmeticError, ValueError) as exc:
            summary[label] = {"error": str(exc)}
            status = EXIT_NONCONVERGED
            continue
        if not res.converged:
            status = EXIT_NONCONVERGED
        pred = predicted_relative_frequencies(ds, spec, res.beta_hat, n_max)
        freq_rows += [(n, label, float(p)) for n, p in enumerate(pred)]
        moment_rows += [(label, j, float(m), float(v)) for j, (m, v) in
                        enumerate(zip(res.fitted["mean"], res.fitted["variance"]))]
        summary[label] = {"loglik": res.loglik, "converged": res.converged}
    with open(out_dir / "frequencies.csv", "w", newline="", encoding="utf-8") as fh:
        _write_csv(freq_rows, ["n", "model", "relative_frequency"], fh)
    with open(out_dir / "moments.csv", "w", newline="", encoding="utf-8") as fh:
        _write_csv(moment_rows, ["model", "observation", "mean", "variance"], fh)
    out.write(json.dumps({"schema": 1, "models": summary, "out_dir": str(out_dir)}, indent=2) + "\n")
    return status


def cmd_surface(args, out):
    lam = np.linspace(args.lambda_min, args.lambda_max, args.lambda_num)
    alp = np.linspace(args.alpha_min, args.alpha_max, args.alpha_num)
    if not (np.all(lam > 0) and np.all(alp > 0)):
        raise UsageError("grid values must be positive")
    surface = vm_surface(args.gamma, lam, alp, args.t)
    _write_csv([(float(l), float(a), float(r)) for l, a, r in surface.rows()], ["lambda", "alpha", "vm_ratio"], out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="suecount", description="Single-unusual-event count models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_flags(sp):
        sp.add_argument("--data", required=True, help="CSV path or bundled dataset name (bids, fertility)")
        sp.add_argument("--response", help="response column")
        sp.add_argument("--covariates", help="comma-separated covariate columns")
        sp.add_argument("--start", choices=("poisson", "zero"), default="poisson")
        sp.add_argument("--max-iters", type=int, default=500)
        sp.add_argument("--tol", type=float, default=1e-6)
        sp.add_argument("--t", type=float, default=1.0, help="exposure")

    def dist_flags(sp):
        sp.add_argument("--lambda", dest="rate", type=float, required=True)
        sp.add_argument("--alpha", type=float, required=True)
        sp.add_argument("--gamma", type=int, default=1)
        sp.add_argument("--t", type=float, default=1.0)

    f = sub.add_parser("fit", help="fit one regression model")
    data_flags(f)
    f.add_argument("--model", choices=tuple(FAMILY), default="sue")
    f.add_argument("--gamma", type=int, default=1)
    f.add_argument("--nmax", type=int, default=None)
    f.add_argument("--format", choices=("json", "table", "csv"), default="json")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("scan", help="fit SUE models over a range of unusual-event indices")
    data_flags(s)
    s.add_argument("--gamma-min", type=int, default=1)
    s.add_argument("--gamma-max", type=int, default=6)
    s.add_argument("--format", choices=("json", "table", "csv"), default="json")
    s.set_defaults(func=cmd_scan, gamma=1)

    m = sub.add_parser("pmf", help="tabulate the SUE pmf")
    dist_flags(m)
    m.add_argument("--nmax", type=int, required=True)
    m.set_defaults(func=cmd_pmf)

    r = sub.add_parser("simulate", help="Monte Carlo histogram of the SUE process")
    dist_flags(r)
    r.add_argument("--paths", type=int, default=100_000)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="export frequency and moment data for several models")
    data_flags(c)
    c.add_argument("--models", default="", help="comma list, e.g. poisson,gamma,sue1")
    c.add_argument("--gamma", type=int, default=1)
    c.add_argument("--nmax", type=int, default=None)
    c.add_argument("--out-dir", default=".")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("surface", help="variance-mean ratio grid")
    v.add_argument("--gamma", type=int, default=1)
    v.add_argument("--lambda-min", type=float, default=0.1)
    v.add_argument("--lambda-max", type=float, default=10.0)
    v.add_argument("--lambda-num", type=int, default=50)
    v.add_argument("--alpha-min", type=float, default=0.1)
    v.add_argument("--alpha-max", type=float, default=3.0)
    v.add_argument("--alpha-num", type=int, default=30)
    v.add_argument("--t", type=float, default=1.0)
    v.set_defaults(func=cmd_surface)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (UsageError, SueError, OSError, ValueError) as exc:
        print(f"suecount: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main_entry():
    sys.exit(main())
