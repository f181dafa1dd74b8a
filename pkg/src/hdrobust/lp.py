"""Dense dual simplex for the Dantzig column program.

    minimize |b|_1  subject to  |S b - c|_inf <= lam

In standard form with ``b = b+ - b-`` and slacks ``s1, s2 >= 0``::

    [ S  -S  I  0 ] [b+ b- s1 s2]' = [ c + lam ]
    [-S   S  0  I ]                  [ lam - c ]

The all-slack basis has reduced costs (1, ..., 1, 0, ..., 0) >= 0, i.e. it is
dual feasible for every lam, so the dual simplex needs no phase one.  Only the
right-hand side depends on lam: an optimal basis for one lam is a dual
feasible start for the next, which makes a descending lam path cheap.

Pivoting is deterministic: leaving row = most negative basic value (lowest
index on ties), entering column = minimum dual ratio (largest pivot magnitude,
then lowest index, on ties).
"""

from __future__ import annotations

import numba
import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
ITERATION_LIMIT = 2
NUMERICAL = 3

FEAS_TOL = 1e-10
PIVOT_TOL = 1e-11
RATIO_TIE = 1e-12


@numba.njit(cache=True)
def _pivot(T, beta, d, r, q):
    m, N = T.shape
    inv = 1.0 / T[r, q]
    for j in range(N):
        T[r, j] *= inv
    beta[r] *= inv
    for i in range(m):
        if i != r:
            f = T[i, q]
            if f != 0.0:
                for j in range(N):
                    T[i, j] -= f * T[r, j]
                beta[i] -= f * beta[r]
    f = d[q]
    if f != 0.0:
        for j in range(N):
            d[j] -= f * T[r, j]
    d[q] = 0.0


@numba.njit(cache=True)
def _dual_simplex(T, beta, d, basis, max_iter):
    m, N = T.shape
    it = 0
    while it < max_iter:
        r = -1
        most = -FEAS_TOL
        for i in range(m):
            if beta[i] < most:
                most = beta[i]
                r = i
        if r == -1:
            return OPTIMAL, it
        q = -1
        best = np.inf
        best_a = 0.0
        for j in range(N):
            a = T[r, j]
            if a < -PIVOT_TOL:
                dj = d[j] if d[j] > 0.0 else 0.0
                ratio = dj / (-a)
                if ratio < best - RATIO_TIE or (ratio <= best + RATIO_TIE and -a > best_a):
                    best = ratio
                    best_a = -a
                    q = j
        if q == -1:
            return INFEASIBLE, it
        _pivot(T, beta, d, r, q)
        basis[r] = q
        it += 1
    return ITERATION_LIMIT, it


@numba.njit(cache=True)
def _standard_form(S):
    p = S.shape[0]
    m = 2 * p
    A = np.zeros((m, 4 * p))
    A[:p, :p] = S
    A[:p, p:2 * p] = -S
    A[p:, :p] = -S
    A[p:, p:2 * p] = S
    for i in range(m):
        A[i, 2 * p + i] = 1.0
    cost = np.zeros(4 * p)
    cost[: 2 * p] = 1.0
    return A, cost


@numba.njit(cache=True)
def _rhs(c, lam):
    p = c.shape[0]
    r = np.empty(2 * p)
    r[:p] = c + lam
    r[p:] = lam - c
    return r


@numba.njit(cache=True)
def _refactor(A, cost, basis, rhs):
    Bmat = A[:, basis]
    Binv = np.linalg.inv(Bmat)
    T = Binv @ A
    beta = Binv @ rhs
    d = cost - cost[basis] @ T
    for k in range(basis.shape[0]):
        d[basis[k]] = 0.0
    return T, beta, d


@numba.njit(cache=True)
def _extract(beta, basis, p):
    b = np.zeros(p)
    for i in range(basis.shape[0]):
        j = basis[i]
        if j < p:
            b[j] += beta[i]
        elif j < 2 * p:
            b[j - p] -= beta[i]
    return b


@numba.njit(cache=True)
def dantzig_path(S, c, lams, max_iter):
    """Solve the column program for each lam in ``lams`` (any order).

    Returns ``(B, status, pivots)`` with ``B[k]`` the solution for ``lams[k]``.
    Solutions are verified against the original constraints; a violation above
    ``FEAS_TOL`` triggers a refactorization from the current basis.
    """
    p = S.shape[0]
    A, cost = _standard_form(S)
    m = 2 * p
    T = A.copy()
    d = cost.copy()
    basis = np.arange(2 * p, 4 * p)
    K = lams.shape[0]
    out = np.zeros((K, p))
    status = np.zeros(K, dtype=np.int64)
    pivots = np.zeros(K, dtype=np.int64)
    order = np.argsort(-lams)
    for kk in range(K):
        k = order[kk]
        lam = lams[k]
        rhs = _rhs(c, lam)
        # B^{-1} sits in the slack columns of the tableau
        beta = np.ascontiguousarray(T[:, 2 * p:]) @ rhs
        st = NUMERICAL
        total = 0
        for attempt in range(4):
            st, it = _dual_simplex(T, beta, d, basis, max_iter)
            total += it
            if st != OPTIMAL:
                break
            b = _extract(beta, basis, p)
            viol = np.max(np.abs(S @ b - c)) - lam
            if viol <= FEAS_TOL and np.min(beta) >= -FEAS_TOL:
                out[k] = b
                break
            T, beta, d = _refactor(A, cost, basis, rhs)
            st = NUMERICAL
        if st == INFEASIBLE or st == ITERATION_LIMIT or st == NUMERICAL:
            # restart later solves from a clean factorization
            T, beta, d = _refactor(A, cost, basis, rhs)
        status[k] = st
        pivots[k] = total
    return out, status, pivots


@numba.njit(cache=True)
def dantzig_columns(S, C, lams, max_iter):
    """Run ``dantzig_path`` for every column of ``C``; returns (K, p, ncol)."""
    p = S.shape[0]
    ncol = C.shape[1]
    K = lams.shape[0]
    out = np.zeros((K, p, ncol))
    status = np.zeros((K, ncol), dtype=np.int64)
    for j in range(ncol):
        cj = np.ascontiguousarray(C[:, j])
        B, st, _ = dantzig_path(S, cj, lams, max_iter)
        for k in range(K):
            out[k, :, j] = B[k]
            status[k, j] = st[k]
    return out, status
