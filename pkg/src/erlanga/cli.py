"""Command-line front end: machine-readable tables for every computation.

Output is CSV (default) or JSON.  CSV headers and JSON keys are fixed per
subcommand (see :data:`COLUMNS`).  Exit codes: 0 success, 2 invalid
parameters or failed validation, 3 accuracy target missed (rows flagged),
64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys

from . import special
from .diffusion import HwScaling, hw_fpt_erlang_a, hw_fpt_mmm
from .errors import AccuracyError, ErlangAError
from .inversion import InversionConfig, invert, invert_mean
from .model import ModelParams, default_nmax, steady_state
from .oracle import OracleConfig, fpt_oracle, transient_grid
from .passage import FptSpec, mean_fpt, mean_fpt_recurrence, qhat, qhat_mmm
from .transient import TransformHandle, busy_transform, phat, phat_loss, phat_mm_inf, phat_mmm
from .validation import CHECKS, run_checks

__all__ = ["main", "COLUMNS", "EXIT_OK", "EXIT_INVALID", "EXIT_ACCURACY", "EXIT_USAGE"]

EXIT_OK, EXIT_INVALID, EXIT_ACCURACY, EXIT_USAGE = 0, 2, 3, 64

THREADS_ENV = "ERLANGA_THREADS"

# fixed output schema; "oracle" columns appear only with --oracle
COLUMNS = {
    "transient": ["n", "t", "value", "error", "flag"],
    "limit": ["n", "t", "value", "error", "flag"],
    "steady": ["n", "value"],
    "busy": ["t", "value", "error", "flag"],
    "fpt": ["t", "density", "density_error", "cdf", "cdf_error", "flag"],
    "mean-fpt": ["n", "value", "recurrence"],
    "diffusion": ["theta_re", "theta_im", "value_re", "value_im"],
    "diffusion-time": ["t", "density", "density_error", "flag"],
    "validate": ["check", "error", "tolerance", "status"],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _model_flags(p: argparse.ArgumentParser, need_m: bool = True):
    g = p.add_argument_group("model")
    rate = g.add_mutually_exclusive_group(required=True)
    rate.add_argument("--lambda", dest="lam", type=float, help="arrival rate")
    rate.add_argument("--rho", type=float, help="offered load lambda/mu")
    g.add_argument("--mu", type=float, default=1.0, help="service rate (default 1)")
    if need_m:
        g.add_argument("--m", type=int, default=1, help="number of servers (default 1)")
    g.add_argument("--eta", type=float, default=0.0, help="abandonment rate (default 0)")


def _inversion_flags(p: argparse.ArgumentParser):
    d = InversionConfig()
    g = p.add_argument_group("inversion")
    g.add_argument("--method", choices=["euler", "gaver"], default=d.method)
    g.add_argument("--target", type=float, default=d.target, help="absolute accuracy target")
    g.add_argument("--abscissa", type=float, default=d.abscissa)
    g.add_argument("--terms", type=int, default=d.terms)
    g.add_argument("--max-terms", type=int, default=d.max_terms)
    g.add_argument("--contour-tol", type=float, default=special.DEFAULT_CONTOUR.tol,
                   help="relative tolerance of the contour quadratures")


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--output", help="write to this file instead of stdout")
    try:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    except ValueError:
        threads = 1
    p.add_argument("--threads", type=int, default=threads,
                   help=f"worker threads for transform evaluation (default ${THREADS_ENV} or 1)")


def _oracle_flags(p: argparse.ArgumentParser):
    p.add_argument("--oracle", action="store_true", help="add an independent oracle column")
    p.add_argument("--seed", type=int, default=OracleConfig().seed)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="erlanga", description="Transient and hitting-time analysis of the "
                 "M/M/m+M queue.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("transient", help="p_n(t) by transform inversion")
    _model_flags(p)
    p.add_argument("--n0", type=int, required=True, help="initial state")
    p.add_argument("--n", type=int, nargs="+", help="states (default 0..N_max)")
    p.add_argument("--t", type=float, nargs="+", required=True, help="times")
    _inversion_flags(p), _common_flags(p), _oracle_flags(p)

    p = sub.add_parser("steady", help="stationary distribution")
    _model_flags(p)
    p.add_argument("--nmax", type=int, help="largest state listed")
    _common_flags(p)

    p = sub.add_parser("busy", help="P[N(t) >= m]")
    _model_flags(p)
    p.add_argument("--n0", type=int, required=True)
    p.add_argument("--t", type=float, nargs="+", required=True)
    _inversion_flags(p), _common_flags(p), _oracle_flags(p)

    p = sub.add_parser("fpt", help="hitting-time density and distribution of a level")
    _model_flags(p)
    p.add_argument("--n0", type=int, required=True, help="start state")
    p.add_argument("--nstar", type=int, required=True, help="target level above n0")
    p.add_argument("--t", type=float, nargs="+", required=True)
    _inversion_flags(p), _common_flags(p), _oracle_flags(p)

    p = sub.add_parser("mean-fpt", help="mean hitting times of a level from every lower state")
    _model_flags(p)
    p.add_argument("--nstar", type=int, required=True)
    p.add_argument("--form", choices=["closed", "h"], default="closed")
    p.add_argument("--derivative", action="store_true",
                   help="add the mean from differences of the transform at 0")
    _common_flags(p)

    p = sub.add_parser("limit", help="special cases: infinite servers, no abandonment, loss")
    p.add_argument("--model", choices=["mminf", "mmm", "loss"], required=True)
    _model_flags(p)
    p.add_argument("--n0", type=int, required=True)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--t", type=float, nargs="+", required=True)
    _inversion_flags(p), _common_flags(p)

    p = sub.add_parser("diffusion", help="square-root staffing limit of the hitting-time transform")
    p.add_argument("--beta", type=float, required=True, help="slack, rho = m - beta sqrt(m)")
    p.add_argument("--x", type=float, required=True, help="scaled start state")
    p.add_argument("--b", type=float, required=True, help="scaled target level")
    p.add_argument("--eta", type=float, default=0.0, help="abandonment rate (0: no abandonment)")
    when = p.add_mutually_exclusive_group(required=True)
    when.add_argument("--theta", type=complex, nargs="+", help="transform arguments")
    when.add_argument("--t", type=float, nargs="+", help="times for the limiting density")
    _inversion_flags(p), _common_flags(p)

    p = sub.add_parser("validate", help="run the identity suite")
    p.add_argument("--check", nargs="+", choices=[c[0] for c in CHECKS], help="subset to run")
    p.add_argument("--contour-tol", type=float, default=special.DEFAULT_CONTOUR.tol)
    _common_flags(p)
    return ap


def _params(a) -> ModelParams:
    lam = a.lam if a.lam is not None else a.rho * a.mu
    return ModelParams(lam, a.mu, getattr(a, "m", 1), a.eta)


def _icfg(a) -> InversionConfig:
    return InversionConfig(method=a.method, target=a.target, abscissa=a.abscissa, terms=a.terms,
                           max_terms=a.max_terms, workers=max(1, a.threads), strict=False)


def _flag(err: float, target: float) -> str:
    return "ok" if err <= target else "inaccurate"


def _run_grid(handle, ns, ts, a, oracle=None):
    cfg = _icfg(a)
    res = invert(handle, ts, cfg)
    rows = []
    for j, t in enumerate(ts):
        for i, n in enumerate(ns):
            row = {"n": n, "t": t, "value": float(res.values[j, i]),
                   "error": float(res.errors[j, i]),
                   "flag": _flag(res.errors[j, i], cfg.target)}
            if oracle is not None:
                row["oracle"] = float(oracle[j, n]) if n < oracle.shape[1] else 0.0
            rows.append(row)
    return rows


def _cmd_transient(a):
    params = _params(a)
    ns = a.n if a.n else list(range(default_nmax(params, a.n0) + 1))
    oracle = None
    if a.oracle:
        oracle, _ = transient_grid(params, a.n0, a.t, OracleConfig(seed=a.seed))
    return _run_grid(phat(params, a.n0, ns), ns, a.t, a, oracle)


def _cmd_limit(a):
    params = _params(a)
    ns = a.n if a.n else list(range(default_nmax(params.with_eta(1.0) if a.model == "mminf"
                                                 else params, a.n0) + 1))
    if a.model == "mminf":
        handle = phat_mm_inf(params.rho, a.n0, ns, params.mu)
    elif a.model == "mmm":
        handle = phat_mmm(params.with_eta(0.0), a.n0, ns)
    else:
        ns = [n for n in ns if n <= params.m]
        handle = phat_loss(params.rho, params.m, a.n0, ns, params.mu)
    return _run_grid(handle, ns, a.t, a)


def _cmd_steady(a):
    pmf = steady_state(_params(a), a.nmax)
    return [{"n": n, "value": float(v)} for n, v in enumerate(pmf.values)]


def _cmd_busy(a):
    params = _params(a)
    cfg = _icfg(a)
    res = invert(busy_transform(params, a.n0), a.t, cfg)
    oracle = None
    if a.oracle:
        grid, _ = transient_grid(params, a.n0, a.t, OracleConfig(seed=a.seed))
        oracle = grid[:, params.m:].sum(axis=1)
    rows = []
    for j, t in enumerate(a.t):
        row = {"t": t, "value": float(res.values[j]), "error": float(res.errors[j]),
               "flag": _flag(res.errors[j], cfg.target)}
        if oracle is not None:
            row["oracle"] = float(oracle[j])
        rows.append(row)
    return rows


def _cmd_fpt(a):
    params = _params(a)
    cfg = _icfg(a)
    q = qhat(params, FptSpec(a.n0, a.nstar))
    dens = invert(q, a.t, cfg)
    cdf = invert(TransformHandle(lambda th: q(th) / th, 0.0, "cdf", density=False), a.t, cfg)
    oracle = fpt_oracle(params, a.n0, a.nstar, a.t) if a.oracle else None
    rows = []
    for j, t in enumerate(a.t):
        err = max(dens.errors[j], cdf.errors[j])
        row = {"t": t, "density": float(dens.values[j]), "density_error": float(dens.errors[j]),
               "cdf": float(cdf.values[j]), "cdf_error": float(cdf.errors[j]),
               "flag": _flag(err, cfg.target)}
        if oracle is not None:
            row["oracle_cdf"], row["oracle_density"] = float(oracle[0][j]), float(oracle[1][j])
        rows.append(row)
    return rows


def _cmd_mean_fpt(a):
    params = _params(a)
    q = mean_fpt(params, a.nstar, form=a.form)
    rec = mean_fpt_recurrence(params, a.nstar)
    rows = [{"n": n, "value": float(q[n]), "recurrence": float(rec[n])} for n in range(a.nstar + 1)]
    if a.derivative:
        for n, row in enumerate(rows):
            handle = qhat_mmm(params, FptSpec(n, a.nstar)) if params.eta == 0 else \
                qhat(params, FptSpec(n, a.nstar))
            row["derivative"] = invert_mean(handle) / params.mu if n < a.nstar else 0.0
    return rows


def _cmd_diffusion(a):
    s = HwScaling(a.beta, a.x, a.b)

    def lst(theta):
        v = hw_fpt_erlang_a(s, a.eta, theta) if a.eta > 0 else hw_fpt_mmm(s, theta)
        return v.value

    if a.theta:
        return [{"theta_re": th.real, "theta_im": th.imag, "value_re": lst(th).real,
                 "value_im": lst(th).imag} for th in a.theta]
    cfg = _icfg(a)
    res = invert(TransformHandle(lst, 0.0, "diffusion", density=False), a.t, cfg)
    return [{"t": t, "density": float(res.values[j]), "density_error": float(res.errors[j]),
             "flag": _flag(res.errors[j], cfg.target)} for j, t in enumerate(a.t)]


def _cmd_validate(a):
    return [{"check": r.name, "error": r.error, "tolerance": r.tolerance,
             "status": "pass" if r.passed else "fail"} for r in run_checks(a.check)]


_COMMANDS = {"transient": _cmd_transient, "limit": _cmd_limit, "steady": _cmd_steady,
             "busy": _cmd_busy, "fpt": _cmd_fpt, "mean-fpt": _cmd_mean_fpt,
             "diffusion": _cmd_diffusion, "validate": _cmd_validate}


def _emit(a, rows, status, out):
    if a.format == "json":
        params = {k: v for k, v in vars(a).items()
                  if k not in ("format", "output", "threads", "command")}
        params = {k: (str(v) if isinstance(v, complex) else
                      [str(x) if isinstance(x, complex) else x for x in v] if isinstance(v, list)
                      else v) for k, v in params.items()}
        json.dump({"command": a.command, "params": params, "results": rows, "status": status},
                  out, indent=2, default=float)
        out.write("\n")
        return
    key = "diffusion-time" if a.command == "diffusion" and a.t else a.command
    header = list(COLUMNS[key])
    if rows:
        header += [k for k in rows[0] if k not in header]
    w = csv.DictWriter(out, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def main(argv=None) -> int:
    """Parse ``argv``, run the subcommand and write its table; returns the exit code."""
    a = build_parser().parse_args(argv)
    tol = getattr(a, "contour_tol", None)
    saved = special.DEFAULT_CONTOUR
    if tol is not None:
        special.DEFAULT_CONTOUR = dataclasses.replace(saved, tol=tol)
    try:
        rows = _COMMANDS[a.command](a)
    except AccuracyError as exc:
        print(f"erlanga: accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except (ErlangAError, ValueError, OverflowError) as exc:
        print(f"erlanga: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        special.DEFAULT_CONTOUR = saved

    flags = [r.get("flag") for r in rows]
    if a.command == "validate":
        status = "fail" if any(r["status"] == "fail" for r in rows) else "ok"
        code = EXIT_INVALID if status == "fail" else EXIT_OK
    elif "inaccurate" in flags:
        status, code = "inaccurate", EXIT_ACCURACY
    else:
        status, code = "ok", EXIT_OK
    if any(isinstance(v, float) and not math.isfinite(v) for r in rows for v in r.values()
           if a.command != "validate"):
        status, code = "inaccurate", EXIT_ACCURACY

    buf = io.StringIO()
    _emit(a, rows, status, buf)
    if a.output:
        with open(a.output, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if code == EXIT_ACCURACY:
        print("erlanga: some values missed the accuracy target (flag column)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
