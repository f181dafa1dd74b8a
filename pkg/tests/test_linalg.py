import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hdrobust.linalg import (
    HorizonExceeded,
    InvalidInput,
    NonStationary,
    ShapeError,
    dependence_profile,
    matrix_norms,
    min_eigenvalue_spd,
    operator_norm_2,
    power_norms,
    spectral_radius,
)
from hdrobust.sim import VarDesign, build_design

from oracles import eig2, svd2_max

finite = st.floats(-5, 5, allow_nan=False)


def test_operator_norm_examples():
    assert operator_norm_2(np.eye(3)) == pytest.approx(1.0, rel=1e-12)
    assert operator_norm_2(np.diag([2.0, -3.0])) == pytest.approx(3.0, rel=1e-12)
    assert operator_norm_2([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(1.0, rel=1e-12)


def test_operator_norm_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        operator_norm_2([[np.nan, 0.0], [0.0, 1.0]])


@given(arrays(float, (2, 2), elements=finite))
def test_operator_norm_matches_2x2_oracle(M):
    assert operator_norm_2(M) == pytest.approx(svd2_max(M), rel=1e-9, abs=1e-12)


def test_spectral_radius_examples():
    assert spectral_radius(np.eye(4)) == pytest.approx(1.0)
    assert spectral_radius(np.triu(np.ones((4, 4)), 1)) == pytest.approx(0.0, abs=1e-12)
    M = np.array([[0.5, 0.3], [0.1, 0.4]])
    root = (0.9 + math.sqrt(0.81 - 4 * 0.17)) / 2
    assert spectral_radius(M) == pytest.approx(root, rel=1e-8)


def test_spectral_radius_rotation():
    c, s = math.cos(0.3), math.sin(0.3)
    assert spectral_radius(0.7 * np.array([[c, -s], [s, c]])) == pytest.approx(0.7, rel=1e-10)


@given(arrays(float, (2, 2), elements=finite))
def test_spectral_radius_matches_characteristic_polynomial(M):
    assert spectral_radius(M) == pytest.approx(eig2(M)[-1], rel=1e-7, abs=1e-9)


def test_spectral_radius_shape_error():
    with pytest.raises(ShapeError):
        spectral_radius(np.ones((2, 3)))


def test_min_eigenvalue():
    assert min_eigenvalue_spd(np.eye(3)) == pytest.approx(1.0)
    assert min_eigenvalue_spd(np.diag([4.0, 9.0])) == pytest.approx(4.0)
    assert min_eigenvalue_spd([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidInput):
        min_eigenvalue_spd([[2.0, 1.0], [1.0 + 1e-8, 2.0]])


def test_matrix_norms_hand_values():
    m = matrix_norms([[1.0, -2.0], [3.0, 0.0]])
    assert m.l1_induced == 4.0
    assert m.linf_induced == 3.0
    assert m.frobenius == pytest.approx(math.sqrt(14), abs=1e-15)
    assert m.max_abs == 3.0
    assert m.entry_l1 == 6.0
    z = matrix_norms(np.zeros((3, 3)))
    assert (z.l1_induced, z.linf_induced, z.frobenius, z.max_abs, z.entry_l1) == (0, 0, 0, 0, 0)
    i = matrix_norms(np.eye(5))
    assert (i.l1_induced, i.linf_induced) == (1.0, 1.0)
    assert i.frobenius == pytest.approx(math.sqrt(5))


@settings(max_examples=50)
@given(arrays(float, (4, 3), elements=finite))
def test_norm_ordering(M):
    m = matrix_norms(M)
    op = operator_norm_2(M)
    assert m.max_abs <= op * (1 + 1e-12) + 1e-15
    assert op <= m.frobenius * (1 + 1e-12) + 1e-15


@settings(max_examples=50)
@given(arrays(float, (3, 3), elements=finite))
def test_radius_below_operator_norm(M):
    assert spectral_radius(M) <= operator_norm_2(M) * (1 + 1e-9) + 1e-12


def test_profile_zero_matrix():
    prof = dependence_profile(np.zeros((3, 3)), 0.5, kmax=5)
    assert prof.tau == 1
    assert list(prof.norms) == [1.0, 0, 0, 0, 0, 0]


def test_profile_symmetric_design():
    A = build_design(VarDesign("banded"), 30)
    prof = dependence_profile(A, 0.5, kmax=40)
    assert prof.tau == 1
    assert prof.gamma == pytest.approx(2.0)  # constructive value 1 / rho0
    np.testing.assert_allclose(prof.norms, 0.5 ** np.arange(41), atol=1e-8, rtol=0)


def test_profile_invariants_on_shift_design():
    A = build_design(VarDesign("example_shift", lam=0.55, B=3), 30)
    prof = dependence_profile(A, 0.5, kmax=120)
    assert np.all(prof.norms <= prof.envelope() * (1 + 1e-12))
    assert np.all(prof.norms[1:prof.tau] > 0.5) and prof.norms[prof.tau] <= 0.5
    N = prof.norms
    for k in range(0, 60, 7):
        for j in range(0, 60, 5):
            assert N[k + j] <= N[k] * N[j] + 1e-8


def test_profile_errors():
    with pytest.raises(NonStationary):
        dependence_profile(np.eye(2), 0.5)
    A = build_design(VarDesign("example_shift", lam=0.55, B=3), 30)
    with pytest.raises(HorizonExceeded):
        dependence_profile(A, 0.5, kmax=5)
    with pytest.raises(InvalidInput):
        dependence_profile(np.zeros((2, 2)), 1.5)


def test_power_norms_fresh_products():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 6)) * 0.2
    N = power_norms(A, 6)
    assert N[6] == pytest.approx(np.linalg.norm(np.linalg.matrix_power(A, 6), 2), rel=1e-10)
