"""Command line entry point: ``hdrobust <command> ...``."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bench, io
from .concentration import DominationFailure, check_domination, clipped_linear_transform, empirical_tail
from .huber_reg import WeightSpec, tune
from .robust_mean import huber_mean_vector
from .sim import DESIGN_KINDS, GAUSSIAN, T5, VarDesign, build, make_rng, simulate_var
from .var_est import robust_dantzig_var, robust_lasso_var, tune_var


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _nu_arg(text: str):
    return "auto" if text == "auto" else float(text)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        io.write_text(out, text)


# ------------------------------------------------------------------ commands


def cmd_estimate_mean(args) -> int:
    X = io.read_series(args.input)
    res = huber_mean_vector(X, nu=args.nu, c=args.c)
    lines = ["j,mu_hat_j"] + [f"{j + 1},{float(m)!r}" for j, m in enumerate(res.mu_hat)]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_huber_reg(args) -> int:
    X = io.read_matrix(args.x)
    Y = io.read_vector(args.y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {Y.shape[0]} entries")
    if args.holdout_x:
        holdout = (io.read_matrix(args.holdout_x), io.read_vector(args.holdout_y))
        train = (X, Y)
    else:
        k = int(round(X.shape[0] * (1.0 - args.holdout_frac)))
        if not 1 <= k < X.shape[0]:
            raise ValueError("holdout fraction leaves an empty split")
        train, holdout = (X[:k], Y[:k]), (X[k:], Y[k:])
    B = io.read_matrix(args.B) if args.B and args.B != "identity" else None
    spec = WeightSpec(b=args.b, B=B)
    res = tune(*train, _floats(args.nu_grid) if args.nu_grid else None,
               _floats(args.lambda_grid) if args.lambda_grid else None, holdout, weight=spec)
    out = {
        "beta_hat": [float(v) for v in res.fit.beta_hat],
        "nu": float(res.nu),
        "lambda": float(res.lam),
        "objective": float(res.fit.objective[-1]),
        "kkt_residual": float(res.fit.kkt_residual),
        "holdout_error": float(res.holdout_error),
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return 0


def _var_command(method: str, args) -> int:
    X = io.read_series(args.input)
    nus = _floats(args.nu) if args.nu else None
    lams = _floats(args.lam) if args.lam else None
    if nus and lams and len(nus) == 1 and len(lams) == 1:
        fit = robust_lasso_var if method == "lasso" else robust_dantzig_var
        est = fit(X, nus[0], lams[0])
        diag = {"method": est.method, "nu": est.nu, "lambda": est.lam, "tuned": False}
    else:
        if args.holdout:
            train, holdout = X, io.read_series(args.holdout)
        else:
            n = (X.shape[0] - 1) // 2
            train, holdout = X[: n + 1], X[n:]
        res = tune_var(train, holdout, method if not args.plain else method + "_plain", nus, lams)
        est = res.estimate
        diag = {"method": est.method, "nu": est.nu, "lambda": est.lam, "tuned": True,
                "holdout_error": res.holdout_error, "max_kkt_ratio": res.max_kkt_ratio,
                "max_feasibility_violation": res.max_feasibility, "skipped": res.skipped}
    _emit(io.matrix_to_csv(est.A_hat), args.out)
    if args.diagnostics:
        io.write_text(args.diagnostics, json.dumps(diag, indent=2, default=float) + "\n")
    return 0


def cmd_concentration(args) -> int:
    p = args.p
    if args.model == "iid":
        A = np.zeros((p, p))
    else:
        if not abs(args.ar) < 1:
            raise ValueError("AR coefficient must satisfy |a| < 1")
        A = args.ar * np.eye(p)
    G = clipped_linear_transform(np.full(p, 1.0 / p), args.M)
    table = empirical_tail(A, G, args.n, reps=args.reps, seed=args.seed,
                           innov=T5 if args.innovations == "t5" else GAUSSIAN, rho0=args.rho0)
    lines = ["x,empirical,bound,stderr"]
    lines += [",".join(repr(float(v)) for v in row) for row in table.rows()]
    _emit("\n".join(lines) + "\n", args.out)
    try:
        check_domination(table, label=f"{args.model} n={args.n}")
    except DominationFailure as exc:
        print(f"domination failure: {exc}", file=sys.stderr)
        return 3
    return 0


def cmd_bench(args) -> int:
    if args.kind == "profile":
        rows = bench.emit_profile(args.design.split(","), _ints(args.p), args.kmax, seed=args.seed)
        _emit(bench.profile_csv(rows), args.out)
        return 0
    cfg = bench.ExperimentConfig.load(args.config)
    if cfg.kind != args.kind:
        raise ValueError(f"config describes a {cfg.kind!r} experiment, not {args.kind!r}")
    if args.workers:
        cfg.workers = args.workers
    result = bench.run_benchmark(cfg)
    out = args.out or cfg.output
    if out:
        paths = bench.write_outputs(result, out)
        for k, v in paths.items():
            print(f"{k}: {v}", file=sys.stderr)
    else:
        sys.stdout.write(bench.summary_csv(result.summary))
    return 0


def cmd_simulate(args) -> int:
    rng = make_rng(args.seed)
    design = build(VarDesign(args.design), args.p, rng)
    X = simulate_var(design.A, args.n, T5 if args.innovations == "t5" else GAUSSIAN, rng=rng).X
    _emit(io.series_to_csv(X), args.out)
    if args.matrix_out:
        io.write_text(args.matrix_out, io.matrix_to_csv(design.A))
    return 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdrobust", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("estimate-mean", help="coordinatewise Huber mean of a series CSV")
    m.add_argument("--input", required=True)
    m.add_argument("--nu", type=_nu_arg, default="auto", help="'auto' or a positive number")
    m.add_argument("--c", type=float, default=1.0, help="multiplier for the automatic nu")
    m.add_argument("--out")
    m.set_defaults(func=cmd_estimate_mean)

    h = sub.add_parser("huber-reg", help="weighted l1-penalized Huber regression, tuned on a holdout")
    h.add_argument("--x", required=True, help="design matrix CSV (no header)")
    h.add_argument("--y", required=True, help="response CSV, one value per line")
    h.add_argument("--b", type=float, default=math.inf, help="weight cap; inf disables weighting")
    h.add_argument("--B", default="identity", help="'identity' or a weight matrix CSV")
    h.add_argument("--nu-grid")
    h.add_argument("--lambda-grid")
    h.add_argument("--holdout-x")
    h.add_argument("--holdout-y")
    h.add_argument("--holdout-frac", type=float, default=0.5)
    h.add_argument("--out")
    h.set_defaults(func=cmd_huber_reg)

    for method in ("lasso", "dantzig"):
        v = sub.add_parser(f"var-{method}", help=f"robust {method} estimate of a VAR(1) transition matrix")
        v.add_argument("--input", required=True, help="series CSV t,x1..xp")
        v.add_argument("--nu", help="truncation level or comma-separated grid (inf for none)")
        v.add_argument("--lambda", dest="lam", help="penalty level or comma-separated grid")
        v.add_argument("--holdout", help="holdout series CSV; default splits the input in half")
        v.add_argument("--plain", action="store_true", help="tune without truncation")
        v.add_argument("--out")
        v.add_argument("--diagnostics", help="write fit diagnostics JSON here")
        v.set_defaults(func=lambda a, m=method: _var_command(m, a))

    c = sub.add_parser("concentration", help="Monte Carlo check of the Bernstein-type tail bound")
    c.add_argument("--model", choices=["var", "iid"], required=True)
    c.add_argument("--ar", type=float, default=0.5, help="diagonal VAR coefficient")
    c.add_argument("--p", type=int, default=1)
    c.add_argument("--n", type=int, default=200)
    c.add_argument("--reps", type=int, default=10_000)
    c.add_argument("--rho0", type=float, default=0.5)
    c.add_argument("--M", type=float, default=2.0, help="clip level of the transformation")
    c.add_argument("--innovations", choices=["gaussian", "t5"], default="gaussian")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_concentration)

    b = sub.add_parser("bench", help="run a benchmark or emit ||A^k|| profiles")
    b.add_argument("kind", choices=["var", "regression", "profile"])
    b.add_argument("--config", help="JSON experiment config (var, regression)")
    b.add_argument("--out", help="summary CSV path (raw and metadata files sit beside it)")
    b.add_argument("--workers", type=int, default=0)
    b.add_argument("--design", default="toeplitz", help="comma-separated designs (profile)")
    b.add_argument("--p", default="50", help="comma-separated dimensions (profile)")
    b.add_argument("--kmax", type=int, default=80)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("simulate", help="simulate a VAR(1) series from a named design")
    s.add_argument("--design", choices=DESIGN_KINDS, default="banded")
    s.add_argument("--p", type=int, default=50)
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--innovations", choices=["gaussian", "t5"], default="t5")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--matrix-out")
    s.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "bench" and args.kind != "profile" and not args.config:
        ap.error("bench var/regression requires --config")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
