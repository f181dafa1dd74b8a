import json

import numpy as np
import pytest

from hdrobust import bench
from hdrobust.bench import (
    BenchmarkAborted,
    CertificateViolation,
    ConfigError,
    ExperimentConfig,
    aggregate,
    check_certificates,
    emit_profile,
    read_csv,
    run_regression_benchmark,
    run_var_benchmark,
    summary_csv,
    write_outputs,
)


def small_var(**kw):
    base = dict(designs=("banded", "block_diag"), p=8, n=40, reps=2, base_seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(reps=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=("ridge",))
    with pytest.raises(ConfigError):
        ExperimentConfig(nu_grid=())
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "var", "bogus": 1})
    cfg = ExperimentConfig.from_dict({"kind": "regression", "p": 10, "n": 50, "reps": 3})
    assert cfg.methods == ("huber", "weighted")


def test_config_roundtrip(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"kind": "var", "design": "toeplitz", "p": 10, "n": 30, "reps": 1}))
    cfg = ExperimentConfig.load(path)
    assert cfg.designs == ("toeplitz",) and cfg.methods == bench.VAR_METHODS


def test_var_benchmark_is_byte_identical(tmp_path):
    a = run_var_benchmark(small_var())
    b = run_var_benchmark(small_var())
    assert summary_csv(a.summary) == summary_csv(b.summary)
    pa = write_outputs(a, tmp_path / "a" / "s.csv")
    pb = write_outputs(b, tmp_path / "b" / "s.csv")
    assert pa["summary"].read_bytes() == pb["summary"].read_bytes()
    assert pa["raw"].read_bytes() == pb["raw"].read_bytes()
    meta = json.loads(pa["meta"].read_text())
    assert meta["seeds"]["base_seed"] == 11 and "numpy" in meta["versions"]


def test_single_rep_deterministic():
    cfg = small_var(reps=1, designs=("toeplitz",))
    assert summary_csv(run_var_benchmark(cfg).summary) == summary_csv(run_var_benchmark(cfg).summary)


def test_summary_matches_raw_recomputation(tmp_path):
    res = run_var_benchmark(small_var(reps=3))
    paths = write_outputs(res, tmp_path / "s.csv")
    raw = read_csv(paths["raw"])
    summary = read_csv(paths["summary"])
    assert len(summary) == 2 * 4 * 4
    for row in summary:
        vals = np.array([float(r[row["norm"]]) for r in raw
                         if r["design"] == row["design"] and r["method"] == row["method"] and r["status"] == "ok"])
        assert int(row["reps"]) == len(vals)
        assert float(row["mean"]) == pytest.approx(vals.mean(), rel=1e-9)
        assert float(row["sd"]) == pytest.approx(vals.std(ddof=1), rel=1e-8, abs=1e-12)
        assert float(row["sd"]) >= 0


def test_random_design_redrawn_per_replication():
    res = run_var_benchmark(small_var(designs=("random_sparse",), methods=("lasso",), reps=2))
    errs = [r["frobenius"] for r in res.raw]
    assert errs[0] != errs[1]
    assert [r["seed"] for r in res.raw] == [11, 12]


def test_failures_abort():
    cfg = small_var(designs=("banded",), methods=("dantzig",), p=12, n=6, nu_grid=(1.0,), lambda_grid=(1e-12,))
    with pytest.raises(BenchmarkAborted):
        run_var_benchmark(cfg)


def test_certificate_check():
    ok = [{"status": "ok", "method": "lasso", "kkt_ratio": 1e-9, "feasibility": np.nan},
          {"status": "ok", "method": "dantzig", "kkt_ratio": np.nan, "feasibility": 1e-12}]
    certs = check_certificates(ok)
    assert certs["max_kkt_ratio"] == 1e-9
    with pytest.raises(CertificateViolation):
        check_certificates(ok + [{"status": "ok", "method": "lasso", "kkt_ratio": 1e-5, "feasibility": 0}])
    with pytest.raises(CertificateViolation):
        check_certificates(ok + [{"status": "ok", "method": "dantzig_plain", "kkt_ratio": 0, "feasibility": 1e-6}])


def test_monotone_in_n():
    means = {}
    for n in (50, 100):
        cfg = ExperimentConfig(designs=("banded",), methods=("lasso",), p=20, n=n, reps=10, base_seed=5)
        rows = run_var_benchmark(cfg).summary
        means[n] = next(r.mean for r in rows if r.norm == "frobenius")
    assert means[100] <= means[50]


def test_regression_benchmark_small():
    cfg = ExperimentConfig(kind="regression", p=10, n=60, reps=3, b_values=(15.0, 1e9))
    res = run_regression_benchmark(cfg)
    names = [r.method for r in res.summary]
    assert names == ["huber", "weighted_b15", "weighted_b1e+09"]
    by = {r.method: r for r in res.summary}
    assert by["weighted_b1e+09"].mean == pytest.approx(by["huber"].mean, rel=1e-12)
    assert all(r.sd >= 0 and np.isfinite(r.mean) for r in res.summary)
    assert {r["rho"] for r in res.raw if r["method"] == "huber"} == {r["rho"] for r in res.raw}


def test_profiles():
    rows = emit_profile(["banded", "toeplitz", "example_shift"], [20], 30)
    band = np.array([r["norm"] for r in rows if r["design"] == "banded"])
    np.testing.assert_allclose(band, 0.5 ** np.arange(31), atol=1e-8, rtol=0)
    assert all(r["norm"] == 1.0 for r in rows if r["k"] == 0)
    shift = np.array([r["norm"] for r in rows if r["design"] == "example_shift"])
    k = int(np.argmax(shift))
    assert 0 < k < 30 and shift[k] > 1.0
    text = bench.profile_csv(rows)
    assert text.splitlines()[0] == "design,p,k,norm"


def test_aggregate_excludes_failures():
    cfg = ExperimentConfig(p=5, n=10, reps=3)
    raw = [
        {"design": "banded", "method": "lasso", "status": "ok", "linf": 1.0},
        {"design": "banded", "method": "lasso", "status": "failed", "linf": np.nan},
        {"design": "banded", "method": "lasso", "status": "ok", "linf": 3.0},
    ]
    (row,) = aggregate(raw, ("linf",), cfg, lambda d: 1)
    assert (row.mean, row.reps) == (2.0, 2)
    assert row.sd == pytest.approx(np.sqrt(2.0))
