"""Seeded Monte Carlo harness for the VAR and regression experiments.

Replication ``r`` draws everything (random design entries, series, error AR
coefficient) from ``make_rng(base_seed + r)``.  Each run writes

* a summary CSV (``ResultRow`` schema, one row per design/method/norm),
* a raw per-replication CSV from which the summary can be recomputed,
* a metadata JSON with seeds, grids, versions and solver certificates.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .huber_reg import TuningFailed, WeightSpec, tune
from .linalg import power_norms
from .sim import DESIGN_KINDS, GAUSSIAN, T5, InnovationDist, VarDesign, build, log_sparsity, make_rng, make_regression_dataset, simulate_var
from .var_est import EstimationFailed, Infeasible, estimation_errors, tune_var

log = logging.getLogger(__name__)

SUMMARY_SCHEMA = "# hdrobust-summary v1"
RAW_SCHEMA = "# hdrobust-raw v1"
VAR_METHODS = ("lasso", "lasso_plain", "dantzig", "dantzig_plain")
VAR_NORMS = ("linf", "l1", "frobenius", "max")
KKT_CERT = 1e-6
FEAS_CERT = 1e-8
MAX_FAILURE_RATE = 0.05


class ConfigError(ValueError):
    pass


class BenchmarkAborted(RuntimeError):
    pass


class CertificateViolation(AssertionError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "var"  # "var" or "regression"
    designs: tuple[str, ...] = ("banded",)
    p: int = 50
    n: int = 100
    reps: int = 200
    methods: tuple[str, ...] | None = None
    nu_grid: tuple[float, ...] | None = None
    lambda_grid: tuple[float, ...] | None = None
    b_values: tuple[float, ...] = (5.0, 15.0, 50.0, 100.0)
    innovations: str = "t5"
    base_seed: int = 20240101
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.designs = tuple(self.designs)
        if self.methods is None:
            self.methods = VAR_METHODS if self.kind == "var" else ("huber", "weighted")
        self.methods = tuple(self.methods)
        self.b_values = tuple(float(b) for b in self.b_values)
        if self.nu_grid is not None:
            self.nu_grid = tuple(float(v) for v in self.nu_grid)
        if self.lambda_grid is not None:
            self.lambda_grid = tuple(float(v) for v in self.lambda_grid)
        self.validate()

    def validate(self) -> None:
        if self.kind not in ("var", "regression"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.reps < 1 or self.n < 2 or self.p < 2:
            raise ConfigError("need reps >= 1, n >= 2, p >= 2")
        if self.nu_grid is not None and not self.nu_grid:
            raise ConfigError("nu_grid is empty")
        if self.lambda_grid is not None and not self.lambda_grid:
            raise ConfigError("lambda_grid is empty")
        if self.innovations not in ("t5", "gaussian"):
            raise ConfigError("innovations must be 't5' or 'gaussian'")
        if self.kind == "var":
            for d in self.designs:
                if d not in DESIGN_KINDS:
                    raise ConfigError(f"unknown design {d!r}")
            for m in self.methods:
                if m not in VAR_METHODS:
                    raise ConfigError(f"unknown VAR method {m!r}")
        else:
            for m in self.methods:
                if m != "huber" and not m.startswith("weighted"):
                    raise ConfigError(f"unknown regression method {m!r}")

    @property
    def innov(self) -> InnovationDist:
        return T5 if self.innovations == "t5" else GAUSSIAN

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "design" in d:
            d["designs"] = [d.pop("design")]
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ResultRow:
    design: str
    p: int
    n: int
    s: int
    method: str
    norm: str
    mean: float
    sd: float
    reps: int
    base_seed: int


@dataclass
class BenchmarkResult:
    summary: list[ResultRow]
    raw: list[dict]
    meta: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def _csv_text(header_comment: str, fields: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    buf.write(header_comment + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row[f]) for f in fields])
    return buf.getvalue()


SUMMARY_FIELDS = [f for f in ResultRow.__dataclass_fields__]


def summary_csv(rows: Sequence[ResultRow]) -> str:
    return _csv_text(SUMMARY_SCHEMA, SUMMARY_FIELDS, (asdict(r) for r in rows))


def raw_csv(raw: Sequence[dict]) -> str:
    fields = list(raw[0].keys()) if raw else []
    return _csv_text(RAW_SCHEMA, fields, raw)


def read_csv(path_or_text) -> list[dict]:
    text = Path(path_or_text).read_text() if not str(path_or_text).startswith("#") else str(path_or_text)
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def aggregate(raw: Sequence[dict], norms: Sequence[str], cfg: ExperimentConfig, s_of) -> list[ResultRow]:
    """Mean/sd per (design, method, norm) over successful replications."""
    out = []
    keys = []
    for r in raw:
        k = (r["design"], r["method"])
        if k not in keys:
            keys.append(k)
    for design, method in keys:
        ok = [r for r in raw if r["design"] == design and r["method"] == method and r["status"] == "ok"]
        for norm in norms:
            vals = np.array([r[norm] for r in ok], dtype=float)
            mean = float(vals.mean()) if vals.size else math.nan
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out.append(ResultRow(design, cfg.p, cfg.n, s_of(design), method, norm, mean, sd, int(vals.size), cfg.base_seed))
    return out


def _check_failures(raw: Sequence[dict], label: str) -> int:
    failed = sum(1 for r in raw if r["status"] != "ok")
    if raw and failed / len(raw) > MAX_FAILURE_RATE:
        raise BenchmarkAborted(f"{label}: {failed}/{len(raw)} replication fits failed (> 5%)")
    return failed


# ------------------------------------------------------------------------- VAR


def _var_rep(args) -> list[dict]:
    cfg, design_name, r = args
    seed = cfg.base_seed + r
    rng = make_rng(seed)
    design = build(VarDesign(design_name), cfg.p, rng)
    X = simulate_var(design.A, 2 * cfg.n, cfg.innov, rng=rng).X
    train, holdout = X[: cfg.n + 1], X[cfg.n:]
    rows = []
    for method in cfg.methods:
        row = {"design": design_name, "p": cfg.p, "n": cfg.n, "rep": r, "seed": seed, "method": method}
        try:
            res = tune_var(train, holdout, method, cfg.nu_grid, cfg.lambda_grid)
        except (EstimationFailed, Infeasible) as exc:
            row.update(status="failed", nu=math.nan, lam=math.nan, holdout_error=math.nan,
                       **{k: math.nan for k in VAR_NORMS}, kkt_ratio=math.nan, feasibility=math.nan,
                       skipped=-1, note=str(exc)[:80].replace(",", ";"))
            rows.append(row)
            continue
        errs = estimation_errors(res.estimate.A_hat, design.A)
        row.update(status="ok", nu=res.estimate.nu, lam=res.estimate.lam, holdout_error=res.holdout_error,
                   **errs, kkt_ratio=res.max_kkt_ratio, feasibility=res.max_feasibility,
                   skipped=res.skipped, note="")
        rows.append(row)
    return rows


def _map(fn, jobs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def check_certificates(raw: Sequence[dict]) -> dict:
    ok = [r for r in raw if r["status"] == "ok"]
    kkt = max((r["kkt_ratio"] for r in ok if r["method"].startswith("lasso")), default=0.0)
    feas = max((r["feasibility"] for r in ok if r["method"].startswith("dantzig")), default=0.0)
    if kkt > KKT_CERT:
        raise CertificateViolation(f"Lasso KKT residual {kkt:.3g} * lambda exceeds 1e-6 * lambda")
    if feas > FEAS_CERT:
        raise CertificateViolation(f"Dantzig constraint violated by {feas:.3g} > 1e-8")
    return {"max_kkt_ratio": kkt, "max_dantzig_violation": feas}


def run_var_benchmark(cfg: ExperimentConfig) -> BenchmarkResult:
    if cfg.kind != "var":
        raise ConfigError("not a VAR config")
    t0 = time.perf_counter()
    jobs = [(cfg, d, r) for d in cfg.designs for r in range(cfg.reps)]
    raw = [row for rows in _map(_var_rep, jobs, cfg.workers) for row in rows]
    failures = {d: _check_failures([r for r in raw if r["design"] == d], d) for d in cfg.designs}
    certs = check_certificates(raw)
    s = log_sparsity(cfg.p)
    summary = aggregate(raw, VAR_NORMS, cfg, lambda d: s)
    meta = _meta(cfg, failures, certs, time.perf_counter() - t0)
    return BenchmarkResult(summary, raw, meta)


# ------------------------------------------------------------------ regression


def _reg_methods(cfg: ExperimentConfig) -> list[tuple[str, WeightSpec]]:
    out = []
    for m in cfg.methods:
        if m == "huber":
            out.append(("huber", WeightSpec()))
        elif m == "weighted":
            out.extend((f"weighted_b{b:g}", WeightSpec(b=b)) for b in cfg.b_values)
        else:
            out.append((m, WeightSpec(b=float(m.split("_b", 1)[1]))))
    return out


def _reg_rep(args) -> list[dict]:
    cfg, r = args
    seed = cfg.base_seed + r
    rng = make_rng(seed)
    data = make_regression_dataset(cfg.p, 2 * cfg.n, rng)
    n = cfg.n
    X, Y, Xh, Yh = data.X[:n], data.Y[:n], data.X[n:], data.Y[n:]
    rows = []
    for name, spec in _reg_methods(cfg):
        row = {"design": "regression", "p": cfg.p, "n": n, "rep": r, "seed": seed, "method": name, "rho": data.rho}
        try:
            res = tune(X, Y, cfg.nu_grid, cfg.lambda_grid, (Xh, Yh), weight=spec)
        except TuningFailed as exc:
            row.update(status="failed", nu=math.nan, lam=math.nan, l2=math.nan, kkt=math.nan,
                       note=str(exc)[:80].replace(",", ";"))
            rows.append(row)
            continue
        err = float(np.linalg.norm(res.fit.beta_hat - data.beta_star))
        row.update(status="ok", nu=res.nu, lam=res.lam, l2=err, kkt=res.max_kkt, note="")
        rows.append(row)
    return rows


def run_regression_benchmark(cfg: ExperimentConfig) -> BenchmarkResult:
    if cfg.kind != "regression":
        raise ConfigError("not a regression config")
    t0 = time.perf_counter()
    jobs = [(cfg, r) for r in range(cfg.reps)]
    raw = [row for rows in _map(_reg_rep, jobs, cfg.workers) for row in rows]
    failures = {"regression": _check_failures(raw, "regression")}
    s = min(cfg.p, 2 * log_sparsity(cfg.p))
    summary = aggregate(raw, ("l2",), cfg, lambda d: s)
    meta = _meta(cfg, failures, {}, time.perf_counter() - t0)
    return BenchmarkResult(summary, raw, meta)


def run_benchmark(cfg: ExperimentConfig) -> BenchmarkResult:
    return run_var_benchmark(cfg) if cfg.kind == "var" else run_regression_benchmark(cfg)


def _meta(cfg: ExperimentConfig, failures, certs, elapsed) -> dict:
    return {
        "schema": SUMMARY_SCHEMA.lstrip("# "),
        "config": asdict(cfg),
        "seeds": {"base_seed": cfg.base_seed, "replication_seeds": f"base_seed + r, r = 0..{cfg.reps - 1}",
                  "generator": "numpy PCG64"},
        "grids": {"nu": "default" if cfg.nu_grid is None else list(cfg.nu_grid),
                  "lambda": "default" if cfg.lambda_grid is None else list(cfg.lambda_grid)},
        "failures": failures,
        "certificates": certs,
        "versions": {"hdrobust": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "elapsed_seconds": round(elapsed, 3),
    }


def write_outputs(result: BenchmarkResult, out: str | Path) -> dict[str, Path]:
    """Write ``<out>`` (summary), ``<out stem>_raw.csv`` and ``<out stem>_meta.json``."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    raw_path = out.with_name(out.stem + "_raw.csv")
    meta_path = out.with_name(out.stem + "_meta.json")
    out.write_text(summary_csv(result.summary))
    raw_path.write_text(raw_csv(result.raw))
    meta_path.write_text(json.dumps(result.meta, indent=2, default=str) + "\n")
    return {"summary": out, "raw": raw_path, "meta": meta_path}


# --------------------------------------------------------------------- profiles


def emit_profile(designs: Sequence[str], p_list: Sequence[int], kmax: int, seed: int = 0,
                 lam: float | None = None, B: int = 3) -> list[dict]:
    """``design,p,k,norm`` rows of ``||A^k||`` for plotting decay profiles."""
    rows = []
    for d in designs:
        for p in p_list:
            kw = {} if lam is None else {"lam": lam}
            if d == "example_shift":
                kw.setdefault("lam", 0.55)
                kw["B"] = B
            A = build(VarDesign(d, **kw), p, make_rng(seed)).A
            for k, v in enumerate(power_norms(A, kmax)):
                rows.append({"design": d, "p": p, "k": k, "norm": float(v)})
    return rows


def profile_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["design", "p", "k", "norm"])
    for r in rows:
        w.writerow([r["design"], r["p"], r["k"], _fmt(r["norm"])])
    return buf.getvalue()
