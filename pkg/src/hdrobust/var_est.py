"""Robust estimation of a VAR(1) transition matrix.

Both estimators work on the elementwise-truncated sample ``clip(X, -nu, nu)``:

* Lasso: row j of A solves ``min (1/n) sum_i (X~_ij - b'X~_{i-1})^2 + lam|b|_1``
  (cyclic coordinate descent on the Gram form).
* Dantzig: ``min |b|_1 s.t. |S0 b - S1 u_j|_inf <= lam`` per column with
  ``S_k = (1/n) sum_{i=1..n} X~_{i-k} X~_i'``.  Since ``S1 ~ S0 A'``, the
  stacked column solutions estimate A'; the returned ``A_hat`` is their
  transpose so that both estimators target A in ``X_i = A X_{i-1} + eps_i``.

``nu = inf`` gives the classical (non-robust) versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import lp
from .linalg import InvalidInput, ShapeError, matrix_norms
from .robust_mean import MAD_SCALE

LASSO_TOL = 1e-9
LASSO_MAX_SWEEPS = 100_000
KKT_REL = 1e-8  # internal target; the published certificate is 1e-6 * lam


class Infeasible(RuntimeError):
    def __init__(self, msg: str, violation: float):
        super().__init__(msg)
        self.violation = violation


class EstimationFailed(RuntimeError):
    pass


def _series(X) -> np.ndarray:
    X = np.asarray(getattr(X, "X", X), dtype=float)
    if X.ndim != 2:
        raise ShapeError("series must be a 2-D (n+1) x p block")
    return X


@dataclass
class TruncatedSeries:
    X_tilde: np.ndarray
    nu: float


def truncate(X, nu: float) -> TruncatedSeries:
    if not nu > 0:
        raise InvalidInput("nu must be positive")
    X = _series(X)
    if math.isinf(nu):
        return TruncatedSeries(X.copy(), nu)
    return TruncatedSeries(np.clip(X, -nu, nu), nu)


# --------------------------------------------------------------------------- lasso


@numba.njit(cache=True)
def _kkt_lasso(G, c, b, lam):
    # objective (1/n)|y - Zb|^2 + lam|b|_1 has gradient -2 (c - G b)
    r = c - G @ b
    worst = 0.0
    for j in range(b.shape[0]):
        g = -2.0 * r[j]
        if b[j] > 0:
            v = abs(g + lam)
        elif b[j] < 0:
            v = abs(g - lam)
        else:
            v = abs(g) - lam
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True)
def _cd_gram(G, c, lam, b, tol, max_sweeps, kkt_tol):
    p = c.shape[0]
    r = c - G @ b
    half = 0.5 * lam
    sweeps = 0
    converged = False
    kkt = np.inf
    while sweeps < max_sweeps:
        sweeps += 1
        biggest = 0.0
        for k in range(p):
            gkk = G[k, k]
            if gkk <= 0.0:
                new = 0.0
            else:
                z = r[k] + gkk * b[k]
                if z > half:
                    new = (z - half) / gkk
                elif z < -half:
                    new = (z + half) / gkk
                else:
                    new = 0.0
            delta = new - b[k]
            if delta != 0.0:
                for i in range(p):
                    r[i] -= delta * G[i, k]
                b[k] = new
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest < tol:
            kkt = _kkt_lasso(G, c, b, lam)
            if kkt <= kkt_tol:
                converged = True
                break
            r = c - G @ b
    if not np.isfinite(kkt):
        kkt = _kkt_lasso(G, c, b, lam)
    return b, sweeps, converged, kkt


@numba.njit(cache=True)
def _cd_rows(G, C, lam, B0, tol, max_sweeps, kkt_tol):
    p = G.shape[0]
    m = C.shape[1]
    B = B0.copy()
    sweeps = np.zeros(m, dtype=np.int64)
    conv = np.zeros(m, dtype=np.bool_)
    kkt = np.zeros(m)
    for j in range(m):
        c = np.ascontiguousarray(C[:, j])
        b = np.ascontiguousarray(B[j])
        b, sw, cv, kk = _cd_gram(G, c, lam, b, tol, max_sweeps, kkt_tol)
        B[j] = b
        sweeps[j] = sw
        conv[j] = cv
        kkt[j] = kk
    return B, sweeps, conv, kkt


def _kkt_tol(lam: float, scale: float) -> float:
    return max(KKT_REL * lam, 1e-13 * (1.0 + scale))


@dataclass
class LassoRowResult:
    b: np.ndarray
    converged: bool
    sweeps: int
    kkt_residual: float


def lasso_row_detail(Z, y, lam: float, b0=None) -> LassoRowResult:
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if lam < 0:
        raise InvalidInput("lambda must be non-negative")
    n, p = Z.shape
    G = Z.T @ Z / n
    c = Z.T @ y / n
    b = np.zeros(p) if b0 is None else np.array(b0, dtype=float)
    b, sweeps, conv, kkt = _cd_gram(
        G, c, float(lam), b, LASSO_TOL, LASSO_MAX_SWEEPS, _kkt_tol(lam, np.max(np.abs(c), initial=0.0))
    )
    return LassoRowResult(b, bool(conv), int(sweeps), float(kkt))


def lasso_row(Z, y, lam: float) -> np.ndarray:
    """``argmin_b (1/n)|y - Z b|^2 + lam |b|_1`` by cyclic coordinate descent."""
    return lasso_row_detail(Z, y, lam).b


# ------------------------------------------------------------------------ estimates


@dataclass
class VarEstimate:
    A_hat: np.ndarray
    method: str
    nu: float
    lam: float
    diagnostics: dict = field(default_factory=dict)


def _lasso_moments(Xt: np.ndarray):
    Z = Xt[:-1]
    Y = Xt[1:]
    n = Z.shape[0]
    return Z.T @ Z / n, Z.T @ Y / n


def _lasso_fit(G, C, lam, B0=None):
    p = G.shape[0]
    B0 = np.zeros((C.shape[1], p)) if B0 is None else B0
    tol = _kkt_tol(lam, float(np.max(np.abs(C), initial=0.0)))
    return _cd_rows(G, np.ascontiguousarray(C), float(lam), B0, LASSO_TOL, LASSO_MAX_SWEEPS, tol)


def robust_lasso_var(X, nu: float, lam: float, order=None) -> VarEstimate:
    """Row-by-row Lasso on the truncated sample.

    ``order`` permutes the sequence in which rows are solved; rows are always
    assembled by index, so the result does not depend on it.
    """
    Xt = truncate(X, nu).X_tilde
    if Xt.shape[0] < 3:
        raise InvalidInput("need n >= 2")
    G, C = _lasso_moments(Xt)
    p = G.shape[0]
    idx = np.arange(p) if order is None else np.asarray(order)
    B, sweeps, conv, kkt = _lasso_fit(G, C[:, idx], lam)
    A_hat = np.empty((p, p))
    A_hat[idx] = B
    conv_full = np.empty(p, bool)
    conv_full[idx] = conv
    kkt_full = np.empty(p)
    kkt_full[idx] = kkt
    method = "lasso_plain" if math.isinf(nu) else "lasso"
    return VarEstimate(A_hat, method, nu, lam, {"converged": conv_full, "kkt": kkt_full})


def autocov_robust(X, nu: float, k: int) -> np.ndarray:
    """``(1/n) sum_{i=1..n} X~_{i-k} X~_i'`` for k in {0, 1}."""
    if k not in (0, 1):
        raise InvalidInput("k must be 0 or 1")
    Xt = truncate(X, nu).X_tilde
    n = Xt.shape[0] - 1
    if n < 1:
        raise InvalidInput("need n >= 1")
    cur = Xt[1:]
    lag = Xt[1 - k: n + 1 - k]
    return lag.T @ cur / n


def _dantzig_solve(S0, C, lams, max_iter=None):
    S0 = np.ascontiguousarray(S0, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    lams = np.ascontiguousarray(np.atleast_1d(lams), dtype=float)
    if max_iter is None:
        max_iter = 50 * 4 * S0.shape[0] + 1000
    return lp.dantzig_columns(S0, C, lams, max_iter)


def _min_feasible_lambda(S0, c) -> float:
    """Smallest lam with a feasible column program (bisection on feasibility)."""
    lo, hi = 0.0, float(np.max(np.abs(c)))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        _, st = _dantzig_solve(S0, c[:, None], [mid])
        if st[0, 0] == lp.OPTIMAL:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return hi


def dantzig_column(Sigma0_hat, c, lam: float) -> np.ndarray:
    """``argmin |b|_1 s.t. |Sigma0_hat b - c|_inf <= lam`` via the dual simplex."""
    if lam < 0:
        raise InvalidInput("lambda must be non-negative")
    S0 = np.asarray(Sigma0_hat, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    out, st = _dantzig_solve(S0, c[:, None], [lam])
    if st[0, 0] == lp.INFEASIBLE:
        best = _min_feasible_lambda(S0, c)
        raise Infeasible(f"no b with |S b - c|_inf <= {lam:g}; smallest feasible is ~{best:.6g}", best - lam)
    if st[0, 0] != lp.OPTIMAL:
        raise EstimationFailed(f"dual simplex stopped with status {st[0, 0]}")
    return out[0, :, 0]


def dantzig_feasibility(S0, S1, A_hat, lam) -> float:
    """``max(||S0 A_hat' - S1||_max - lam, 0)``."""
    return max(float(np.max(np.abs(S0 @ A_hat.T - S1))) - lam, 0.0)


def robust_dantzig_var(X, nu: float, lam: float) -> VarEstimate:
    S0 = autocov_robust(X, nu, 0)
    S1 = autocov_robust(X, nu, 1)
    out, st = _dantzig_solve(S0, S1, [lam])
    bad = np.flatnonzero(st[0] != lp.OPTIMAL)
    method = "dantzig_plain" if math.isinf(nu) else "dantzig"
    if bad.size:
        raise Infeasible(f"{method}: columns {bad.tolist()} infeasible at lam={lam:g}", float("nan"))
    A_hat = out[0].T.copy()
    return VarEstimate(A_hat, method, nu, lam, {"feasibility": dantzig_feasibility(S0, S1, A_hat, lam)})


def plain_baselines(X, lam_lasso: float, lam_dantzig: float | None = None) -> dict[str, VarEstimate]:
    lam_dantzig = lam_lasso if lam_dantzig is None else lam_dantzig
    return {
        "lasso_plain": robust_lasso_var(X, math.inf, lam_lasso),
        "dantzig_plain": robust_dantzig_var(X, math.inf, lam_dantzig),
    }


def estimation_errors(A_hat, A) -> dict[str, float]:
    A_hat = np.asarray(A_hat, float)
    A = np.asarray(A, float)
    if A_hat.shape != A.shape:
        raise ShapeError(f"shape mismatch {A_hat.shape} vs {A.shape}")
    nm = matrix_norms(A_hat - A)
    return {"linf": nm.linf_induced, "l1": nm.l1_induced, "frobenius": nm.frobenius, "max": nm.max_abs}


# ---------------------------------------------------------------- rate evaluators


def _rate(n, p, q):
    return (math.log(p) / n) ** (0.5 - 1.0 / (2 * q - 2))


def lasso_linf_rate(mu_q, gamma, tau, A_linf, s, n, p, q, C=1.0):
    """``C mu_q gamma tau (||A||_inf + 1) s (log p / n)^(1/2 - 1/(2q-2))``."""
    return C * mu_q * gamma * tau * (A_linf + 1.0) * s * _rate(n, p, q)


def lasso_frobenius_rate(mu_q, gamma, tau, A_linf, S_total, n, p, q, C=1.0):
    return C * mu_q * gamma * tau * (A_linf + 1.0) * math.sqrt(S_total) * _rate(n, p, q)


def dantzig_max_rate(mu_q, gamma, tau, A_l1, sigma0_inv_l1, n, p, q, C=1.0):
    return C * mu_q * gamma * tau * sigma0_inv_l1 * (A_l1 + 1.0) * _rate(n, p, q)


def dantzig_l1_rate(mu_q, gamma, tau, A_l1, sigma0_inv_l1, s_star, n, p, q, C=1.0):
    return C * mu_q * gamma * tau * sigma0_inv_l1 * (A_l1 + 1.0) * s_star * _rate(n, p, q)


# ------------------------------------------------------------------------ tuning

NU_MULTIPLIERS = np.geomspace(0.5, 2.0, 5)
LAMBDA_FRACTIONS = np.geomspace(0.8, 0.02, 8)


def pilot_scale(X) -> float:
    X = _series(X)
    med = np.median(X, axis=0)
    mad = MAD_SCALE * np.median(np.abs(X - med), axis=0)
    s = float(np.median(mad))
    return s if s > 0 else 1.0


def default_nu_grid(X) -> np.ndarray:
    """Pilot MAD scale times ``(n / log p)^(1/6)`` (moment order 4) times 0.5..2."""
    X = _series(X)
    n, p = X.shape[0] - 1, X.shape[1]
    base = pilot_scale(X) * (n / math.log(max(p, 2))) ** (1.0 / 6.0)
    return base * NU_MULTIPLIERS


def prediction_error(A_hat, holdout) -> float:
    """Mean of ``|X_t - A_hat X_{t-1}|^2`` over consecutive rows of ``holdout``."""
    H = _series(holdout)
    resid = H[1:] - H[:-1] @ A_hat.T
    return float(np.mean(np.sum(resid * resid, axis=1)))


@dataclass
class VarTuneResult:
    estimate: VarEstimate
    holdout_error: float
    grid_errors: dict
    max_kkt_ratio: float  # worst KKT residual / lam over all converged lasso fits
    max_feasibility: float  # worst Dantzig constraint violation over all fits
    skipped: int  # grid points dropped (non-converged or infeasible)


def lambda_threshold(method: str, X, nu: float) -> float:
    """Smallest lambda with the zero matrix as solution."""
    if method.startswith("lasso"):
        _, C = _lasso_moments(truncate(X, nu).X_tilde)
        return 2.0 * float(np.max(np.abs(C)))
    return float(np.max(np.abs(autocov_robust(X, nu, 1))))


def tune_var(
    X,
    holdout,
    method: str = "lasso",
    nu_grid=None,
    lambda_grid=None,
) -> VarTuneResult:
    """Joint (nu, lambda) grid search by holdout one-step prediction error.

    ``X`` holds X_0..X_n (training); ``holdout`` holds X_n..X_2n.  Plain
    methods use nu = inf.  ``lambda_grid=None`` takes 8 log-spaced fractions
    (0.8 .. 0.02) of each nu's zero-solution threshold.  Ties go to the
    smaller nu, then the smaller lambda.
    """
    X = _series(X)
    if method not in ("lasso", "dantzig", "lasso_plain", "dantzig_plain"):
        raise InvalidInput(f"unknown method {method!r}")
    if method.endswith("_plain"):
        nus = np.array([math.inf])
    else:
        nus = np.unique(np.asarray(default_nu_grid(X) if nu_grid is None else nu_grid, float))
    best = None
    grid_errors = {}
    max_kkt_ratio = 0.0
    max_feas = 0.0
    skipped = 0
    for nu in nus:
        if lambda_grid is None:
            lams = lambda_threshold(method, X, nu) * LAMBDA_FRACTIONS
        else:
            lams = np.asarray(lambda_grid, float)
        lams = np.unique(lams)[::-1]
        if method.startswith("lasso"):
            G, C = _lasso_moments(truncate(X, nu).X_tilde)
            B = None
            fits = []
            for lam in lams:
                B, _, conv, kkt = _lasso_fit(G, C, lam, B)
                B = B.copy()
                fits.append((lam, B, bool(conv.all()), float(kkt.max())))
        else:
            S0 = autocov_robust(X, nu, 0)
            S1 = autocov_robust(X, nu, 1)
            out, st = _dantzig_solve(S0, S1, lams)
            fits = []
            for k, lam in enumerate(lams):
                A_hat = out[k].T.copy()
                ok = bool(np.all(st[k] == lp.OPTIMAL))
                feas = dantzig_feasibility(S0, S1, A_hat, lam) if ok else math.nan
                fits.append((lam, A_hat, ok, feas))
        for lam, A_hat, ok, cert in fits:
            if not ok:
                skipped += 1
                continue
            if method.startswith("lasso"):
                max_kkt_ratio = max(max_kkt_ratio, cert / lam if lam > 0 else cert)
            else:
                max_feas = max(max_feas, cert)
            err = prediction_error(A_hat, holdout)
            grid_errors[(float(nu), float(lam))] = err
            key = (err, float(nu), float(lam))
            if best is None or key < best[0]:
                best = (key, A_hat)
    if best is None:
        raise EstimationFailed(f"{method}: every grid point failed")
    (err, nu, lam), A_hat = best
    est = VarEstimate(A_hat, method, nu, lam)
    return VarTuneResult(est, err, grid_errors, max_kkt_ratio, max_feas, skipped)
