import math

import numpy as np
import pytest

from hdrobust.huber_reg import (
    HuberConfig,
    InvalidParameter,
    TuningFailed,
    WeightSpec,
    fit,
    huber_loss,
    lambda_max,
    objective,
    smooth_gradient,
    soft_threshold,
    tune,
    weight,
)
from hdrobust.robust_mean import huber_score
from hdrobust.sim import make_rng

from oracles import grid_argmin


def test_huber_loss_examples():
    assert huber_loss(0.5, 1.0) == 0.125
    assert huber_loss(2.0, 1.0) == 1.5
    assert huber_loss(-1.0, 1.0) == 0.5
    with pytest.raises(InvalidParameter):
        huber_loss(1.0, 0.0)


@pytest.mark.parametrize("nu", [0.5, 1.0, 5.0])
def test_loss_derivative_is_score(nu):
    x = make_rng(int(nu * 10)).uniform(-3 * nu, 3 * nu, 100)
    h = 1e-6
    fd = (huber_loss(x + h, nu) - huber_loss(x - h, nu)) / (2 * h)
    np.testing.assert_allclose(fd, huber_score(x, nu), atol=1e-6)


def test_loss_midpoint_convexity():
    rng = make_rng(2)
    u, v = rng.normal(0, 3, 500), rng.normal(0, 3, 500)
    for nu in (0.3, 1.0, 4.0):
        mid = huber_loss((u + v) / 2, nu)
        assert np.all(mid <= (huber_loss(u, nu) + huber_loss(v, nu)) / 2 + 1e-12)


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    z = make_rng(1).normal(size=10)
    np.testing.assert_array_equal(soft_threshold(z, 0.0), z)


def test_weight_examples():
    spec = WeightSpec(b=5.0)
    assert weight([6.0, 8.0], spec) == 0.5
    assert weight([1.2, 1.6], spec) == 1.0
    assert weight([0.0, 0.0], spec) == 1.0
    assert weight([100.0, 0.0], WeightSpec()) == 1.0


def test_weight_clamp_random_spd():
    rng = make_rng(3)
    for _ in range(5):
        M = rng.normal(size=(4, 4))
        B = M @ M.T + 0.1 * np.eye(4)
        spec = WeightSpec(b=float(rng.uniform(0.5, 5)), B=B)
        X = rng.standard_t(2, (1000, 4)) * 10
        w = spec.weights(X)
        assert np.all((w > 0) & (w <= 1))
        assert np.all(np.linalg.norm(w[:, None] * X, axis=1) <= spec.b0 + 1e-12)


def _problem(seed, n=60, p=5, heavy=True):
    rng = make_rng(seed)
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:2] = [1.5, -2.0]
    noise = rng.standard_t(3, n) if heavy else np.zeros(n)
    return X, X @ beta + noise, beta


def _check_kkt(X, Y, res, spec=WeightSpec()):
    g = smooth_gradient(X, Y, res.beta_hat, res.nu, spec)
    b, lam, tol = res.beta_hat, res.lam, 1e-8
    on = b != 0
    assert np.all(np.abs(g[on] + lam * np.sign(b[on])) <= 10 * tol)
    assert np.all(np.abs(g[~on]) <= lam + 10 * tol)


def test_fit_large_lambda_is_zero():
    X, Y, _ = _problem(1)
    lmax = lambda_max(X, Y, 1.0)
    res = fit(X, Y, HuberConfig(nu=1.0, lam=1.01 * lmax))
    assert res.converged and np.all(res.beta_hat == 0)


def test_fit_noiseless_recovers_least_squares():
    X, Y, beta = _problem(2, heavy=False)
    res = fit(X, Y, HuberConfig(nu=1e6, lam=0.0, tol=1e-12, max_iter=100_000))
    np.testing.assert_allclose(res.beta_hat, beta, atol=1e-6)


def test_fit_trace_monotone_and_kkt():
    for seed in range(5):
        X, Y, _ = _problem(seed)
        for spec in (WeightSpec(), WeightSpec(b=2.0)):
            res = fit(X, Y, HuberConfig(nu=0.8, lam=0.05, weight=spec))
            assert res.converged
            assert np.all(np.diff(res.objective) <= 0)
            _check_kkt(X, Y, res, spec)


def test_fit_matches_2d_grid_oracle():
    rng = make_rng(42)
    for _ in range(100):
        n = 30
        X = rng.normal(size=(n, 2))
        Y = X @ rng.normal(0, 1.5, 2) + rng.standard_t(3, n)
        nu = float(rng.uniform(0.3, 2.0))
        lam = float(rng.uniform(0.0, 0.5))
        spec = WeightSpec(b=float(rng.choice([math.inf, 2.0])))
        res = fit(X, Y, HuberConfig(nu=nu, lam=lam, weight=spec, tol=1e-10, max_iter=100_000))
        w = spec.weights(X)
        Xw, Yw = X * w[:, None], Y * w

        def f(B):
            R = Yw[None, :] - B @ Xw.T
            return huber_loss(R, nu).mean(axis=1) + lam * np.abs(B).sum(axis=1)

        ref = grid_argmin(f, [0.0, 0.0], [6.0, 6.0], steps=41, rounds=10)
        assert np.max(np.abs(res.beta_hat - ref)) <= 1e-3


def test_scaling_homogeneity():
    X, Y, _ = _problem(7)
    c = 3.0
    a = fit(X, Y, HuberConfig(nu=0.7, lam=0.04, tol=1e-12, max_iter=100_000)).beta_hat
    b = fit(c * X, c * Y, HuberConfig(nu=0.7 * c, lam=0.04 * c * c, tol=1e-12, max_iter=100_000)).beta_hat
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_objective_function_agrees_with_trace():
    X, Y, _ = _problem(8)
    res = fit(X, Y, HuberConfig(nu=1.0, lam=0.1))
    assert objective(X, Y, res.beta_hat, 1.0, 0.1) == pytest.approx(res.objective[-1], rel=1e-12)


def test_nonconvergence_is_reported():
    X, Y, _ = _problem(9)
    res = fit(X, Y, HuberConfig(nu=1.0, lam=0.01, max_iter=2))
    assert not res.converged and res.iterations <= 2


def _split(seed, n=80, p=6):
    X, Y, _ = _problem(seed, n=2 * n, p=p)
    return X[:n], Y[:n], (X[n:], Y[n:])


def test_tune_single_point_grid():
    X, Y, hold = _split(1)
    r = tune(X, Y, [0.9], [0.02], hold)
    assert (r.nu, r.lam) == (0.9, 0.02)


def test_tune_duplicates_do_not_change_selection():
    X, Y, hold = _split(2)
    a = tune(X, Y, [0.5, 1.0, 2.0], [0.1, 0.03, 0.01], hold)
    b = tune(X, Y, [2.0, 0.5, 1.0, 0.5], [0.01, 0.1, 0.03, 0.03, 0.1], hold)
    assert (a.nu, a.lam) == (b.nu, b.lam)
    np.testing.assert_array_equal(a.fit.beta_hat, b.fit.beta_hat)


def test_tune_selects_min_holdout_error():
    X, Y, hold = _split(3)
    r = tune(X, Y, None, None, hold)
    assert r.holdout_error == min(r.errors.values())


def test_tune_failure_when_nothing_converges():
    X, Y, hold = _split(4)
    with pytest.raises(TuningFailed):
        tune(X, Y, [1.0], [1e-4], hold, max_iter=1)


def test_huge_b_matches_plain():
    X, Y, hold = _split(5)
    a = tune(X, Y, None, None, hold)
    b = tune(X, Y, None, None, hold, weight=WeightSpec(b=1e9))
    np.testing.assert_array_equal(a.fit.beta_hat, b.fit.beta_hat)
