import math

import numpy as np
import pytest

from hdrobust.concentration import (
    BoundParams,
    DominationFailure,
    TailTable,
    bernstein_bound,
    bernstein_bound_expmoment,
    c1,
    c2,
    check_domination,
    clipped_linear_transform,
    empirical_tail,
    mean_bound_check,
)
from hdrobust.linalg import NonStationary
from hdrobust.sim import make_rng


def _params(**kw):
    base = dict(rho0=0.5, tau=2, gamma=1.5, sigma=1.0, M=2.0, n=200)
    base.update(kw)
    return BoundParams(**base)


def test_constants_at_half():
    # independent evaluation of the closed forms
    e = math.exp(1)
    assert c1(0.5) == pytest.approx(16 * e * e / (math.sqrt(2 * math.pi) * 0.0625 * math.log(2) ** 3), rel=1e-14)
    assert c1(0.5) == pytest.approx(2266.0, abs=0.2)
    assert c2(0.5) == pytest.approx(31.37, abs=0.01)


def test_bound_at_zero_and_monotone():
    p = _params()
    assert bernstein_bound(0.0, p) == 2.0
    assert bernstein_bound(0.0, p, clip=True) == 1.0
    x = np.linspace(0.1, 5000, 300)
    assert np.all(np.diff(bernstein_bound(x, p)) < 0)
    with pytest.raises(ValueError):
        bernstein_bound(-1.0, p)


def test_bound_regime_split():
    p = _params()
    x = np.linspace(0, 3000, 200)
    b = bernstein_bound(x, p)
    gauss = 2 * np.exp(-x**2 / (p.C1 * p.n * p.sigma**2 * p.tau**2 * p.gamma**2))
    expo = 2 * np.exp(-x / (p.C2 * p.tau * p.M))
    assert np.all(b >= gauss * (1 - 1e-12))
    assert np.all(b >= expo * (1 - 1e-12))


def test_expmoment_bound():
    assert bernstein_bound_expmoment(0.0, 100, 1.0, 1.5, 2, 10.0, 5.0) == 2.0
    # when the n-term dominates, quadrupling C3 quarters the exponent's denominator share
    x = 1.0
    a = -math.log(bernstein_bound_expmoment(x, 10**8, 1.0, 1.0, 1, 1.0, 1e-12) / 2)
    b = -math.log(bernstein_bound_expmoment(x, 10**8, 1.0, 1.0, 1, 4.0, 1e-12) / 2)
    assert b == pytest.approx(a / 4, rel=1e-9)
    p = _params(sigma=1.3)
    xs = np.array([0.0, 10.0, 300.0])
    same = bernstein_bound_expmoment(xs, p.n, 1.0, p.gamma, p.tau, p.C1 * p.sigma**2, p.C2 * p.M / p.gamma)
    np.testing.assert_allclose(same, bernstein_bound(xs, p), rtol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        _params(rho0=1.0)
    with pytest.raises(ValueError):
        _params(gamma=0.5)


def test_clipped_linear_transform():
    G = clipped_linear_transform([1.0], 2.0)
    assert G(np.array([[3.0]]))[0] == 2.0
    U = clipped_linear_transform(np.full(4, 0.25), 1.0)
    assert U(np.zeros((1, 4)))[0] == 0.0
    rng = make_rng(1)
    a = rng.normal(size=5)
    a /= np.abs(a).sum()
    G = clipped_linear_transform(a, 1.5)
    u, v = rng.standard_t(2, (500, 5)) * 3, rng.standard_t(2, (500, 5)) * 3
    assert np.all(np.abs(G(u) - G(v)) <= np.abs(u - v) @ np.abs(a) + 1e-12)
    assert np.all(np.abs(G(u)) <= 1.5 + 1e-12)
    with pytest.raises(ValueError):
        clipped_linear_transform([0.5, 0.4], 1.0)


def test_empirical_tail_zero_transform_and_monotone():
    G0 = clipped_linear_transform([1.0], 1e-300)
    t = empirical_tail(np.zeros((1, 1)), G0, 50, reps=1000, seed=1, prerun=20_000)
    assert np.all(t.empirical[t.x > 0] == 0)
    G = clipped_linear_transform([1.0], 2.0)
    t = empirical_tail(np.array([[0.5]]), G, 50, x_grid=np.linspace(0, 40, 30), reps=1000, seed=2, prerun=20_000)
    assert np.all(np.diff(t.empirical) <= 0)


def test_empirical_tail_rejects_nonstationary():
    with pytest.raises(NonStationary):
        empirical_tail(np.array([[1.0]]), clipped_linear_transform([1.0], 1.0), 10)


def test_iid_tail_below_classical_bernstein():
    G = clipped_linear_transform([1.0], 2.0)
    t = empirical_tail(np.zeros((1, 1)), G, 200, reps=10_000, seed=3)
    assert np.all(t.empirical <= t.classical + 3 * t.stderr)


def test_check_domination_raises():
    p = _params()
    tab = TailTable(np.array([1.0]), np.array([0.9]), np.array([0.1]), np.array([0.01]),
                    np.array([0.1]), p, 0.0, 0.0)
    with pytest.raises(DominationFailure):
        check_domination(tab, "synthetic")


def test_mean_bound_check_determinism_and_constant():
    a = mean_bound_check([50, 100], p=5, reps=20, seed=1)
    b = mean_bound_check([50, 100], p=5, reps=20, seed=1)
    np.testing.assert_array_equal(a.mean_error, b.mean_error)
    c = mean_bound_check([50, 100], p=5, reps=20, seed=1, C=2.0)
    np.testing.assert_allclose(c.bound, 2 * a.bound)
    with pytest.raises(ValueError):
        mean_bound_check([100, 50])
