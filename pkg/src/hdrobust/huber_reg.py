"""Weighted l1-penalized Huber regression for dependent heavy-tailed data.

Minimizes ``(1/n) sum_i Phi_nu((Y_i - X_i'beta) w(X_i)) + lam |beta|_1`` with
``w(x) = min(1, b / |Bx|_2)``.  The weights depend on X only, so the smooth
part is an ordinary Huber loss on the reweighted data ``(w*X, w*Y)``; it is
minimized by proximal gradient with a backtracking line search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .linalg import InvalidInput, min_eigenvalue_spd
from .robust_mean import MAD_SCALE, InvalidParameter, huber_score


class TuningFailed(RuntimeError):
    pass


def huber_loss(x, nu: float):
    """``x^2/2`` on ``|x| <= nu``, ``nu|x| - nu^2/2`` outside."""
    if not nu > 0:
        raise InvalidParameter(f"nu must be positive, got {nu}")
    ax = np.abs(x)
    return np.where(ax <= nu, 0.5 * ax * ax, nu * ax - 0.5 * nu * nu)


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


@dataclass(frozen=True)
class WeightSpec:
    """``w(x) = min(1, b / |Bx|_2)``; ``b = inf`` switches weighting off."""

    b: float = math.inf
    B: np.ndarray | None = None  # None means identity

    def __post_init__(self):
        if not self.b > 0:
            raise InvalidInput("b must be positive")
        if self.B is not None:
            B = np.asarray(self.B, dtype=float)
            if min_eigenvalue_spd(B) <= 0:
                raise InvalidInput("B must be positive definite")

    @property
    def b0(self) -> float:
        """``b / lambda_min(B)``, the bound on ``|w(x) x|_2``."""
        if self.B is None:
            return self.b
        return self.b / min_eigenvalue_spd(self.B)

    def weights(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if math.isinf(self.b):
            return np.ones(X.shape[0])
        BX = X if self.B is None else X @ np.asarray(self.B, dtype=float).T
        norms = np.linalg.norm(BX, axis=1)
        w = np.ones_like(norms)
        big = norms > self.b
        w[big] = self.b / norms[big]
        return w


def weight(x, spec: WeightSpec) -> float:
    return float(spec.weights(np.asarray(x, dtype=float)[None, :])[0])


@dataclass(frozen=True)
class HuberConfig:
    nu: float
    lam: float
    weight: WeightSpec = field(default_factory=WeightSpec)
    max_iter: int = 10_000
    tol: float = 1e-8
    shrink: float = 0.5  # backtracking factor

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidParameter("nu must be positive")
        if self.lam < 0:
            raise InvalidParameter("lambda must be non-negative")
        if not self.tol > 0 or self.max_iter < 1:
            raise InvalidParameter("need tol > 0 and max_iter >= 1")
        if not 0 < self.shrink < 1:
            raise InvalidParameter("shrink must lie in (0, 1)")


@dataclass
class FitResult:
    beta_hat: np.ndarray
    objective: np.ndarray  # per-iteration objective, non-increasing
    converged: bool
    iterations: int
    kkt_residual: float
    nu: float
    lam: float

    @property
    def active_set(self) -> list[int]:
        return np.flatnonzero(self.beta_hat).tolist()


@numba.njit(cache=True)
def _huber_obj(Xw, Yw, beta, nu, lam):
    n = Xw.shape[0]
    r = Yw - Xw @ beta
    tot = 0.0
    for i in range(n):
        a = abs(r[i])
        if a <= nu:
            tot += 0.5 * a * a
        else:
            tot += nu * a - 0.5 * nu * nu
    return tot / n + lam * np.sum(np.abs(beta))


@numba.njit(cache=True)
def _huber_grad(Xw, Yw, beta, nu):
    n = Xw.shape[0]
    r = Yw - Xw @ beta
    for i in range(n):
        if r[i] > nu:
            r[i] = nu
        elif r[i] < -nu:
            r[i] = -nu
    return -(Xw.T @ r) / n


@numba.njit(cache=True)
def _kkt(grad, beta, lam):
    worst = 0.0
    for j in range(beta.shape[0]):
        if beta[j] > 0:
            v = abs(grad[j] + lam)
        elif beta[j] < 0:
            v = abs(grad[j] - lam)
        else:
            v = abs(grad[j]) - lam
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True)
def _prox_grad(Xw, Yw, nu, lam, beta0, step0, shrink, tol, max_iter):
    beta = beta0.copy()
    trace = np.empty(max_iter + 1)
    f_smooth = _huber_obj(Xw, Yw, beta, nu, 0.0)
    trace[0] = f_smooth + lam * np.sum(np.abs(beta))
    converged = False
    it = 0
    step = step0
    kkt = np.inf
    while it < max_iter:
        g = _huber_grad(Xw, Yw, beta, nu)
        t = step
        while True:
            z = beta - t * g
            cand = np.sign(z) * np.maximum(np.abs(z) - t * lam, 0.0)
            d = cand - beta
            f_cand = _huber_obj(Xw, Yw, cand, nu, 0.0)
            if f_cand <= f_smooth + g @ d + (d @ d) / (2.0 * t) + 1e-15 * abs(f_smooth) or t < 1e-300:
                break
            t *= shrink
        F_cand = f_cand + lam * np.sum(np.abs(cand))
        change = np.max(np.abs(d)) if d.shape[0] > 0 else 0.0
        if F_cand > trace[it]:
            # rounding-level increase: no further progress possible
            kkt = _kkt(g, beta, lam)
            converged = kkt <= 10.0 * tol
            break
        it += 1
        beta = cand
        f_smooth = f_cand
        trace[it] = F_cand
        if change < tol:
            kkt = _kkt(_huber_grad(Xw, Yw, beta, nu), beta, lam)
            if kkt <= 10.0 * tol:
                converged = True
                break
    if not np.isfinite(kkt):
        kkt = _kkt(_huber_grad(Xw, Yw, beta, nu), beta, lam)
    return beta, trace[: it + 1], converged, it, kkt


def _reweight(X, Y, spec: WeightSpec):
    w = spec.weights(X)
    return X * w[:, None], Y * w


def lipschitz(Xw: np.ndarray) -> float:
    n = Xw.shape[0]
    if Xw.size == 0:
        return 1.0
    L = np.linalg.norm(Xw, 2) ** 2 / n
    return L if L > 0 else 1.0


def _fit_weighted(Xw, Yw, cfg: HuberConfig, beta0=None, L=None) -> FitResult:
    p = Xw.shape[1]
    beta0 = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float)
    L = lipschitz(Xw) if L is None else L
    beta, trace, conv, it, kkt = _prox_grad(
        Xw, Yw, float(cfg.nu), float(cfg.lam), beta0, 1.0 / L, cfg.shrink, cfg.tol, cfg.max_iter
    )
    return FitResult(beta, trace, bool(conv), int(it), float(kkt), cfg.nu, cfg.lam)


def _check_xy(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise InvalidInput(f"shape mismatch X{X.shape} Y{Y.shape}")
    if X.shape[0] < 2:
        raise InvalidInput("need n >= 2")
    return X, Y


def fit(X, Y, cfg: HuberConfig, beta0=None) -> FitResult:
    """Proximal gradient on the weighted Huber objective.

    The step starts at ``1/L`` with ``L = ||w*X||_2^2 / n`` (the Huber
    curvature is at most one) and is halved until the quadratic upper bound
    holds.  Stops once the l-inf iterate change is below ``tol`` and the KKT
    residual is below ``10 tol``; otherwise returns ``converged=False``.
    """
    X, Y = _check_xy(X, Y)
    Xw, Yw = _reweight(X, Y, cfg.weight)
    return _fit_weighted(Xw, Yw, cfg, beta0)


def smooth_gradient(X, Y, beta, nu: float, spec: WeightSpec = WeightSpec()) -> np.ndarray:
    X, Y = _check_xy(X, Y)
    Xw, Yw = _reweight(X, Y, spec)
    return -(Xw.T @ huber_score(Yw - Xw @ np.asarray(beta, float), nu)) / Xw.shape[0]


def objective(X, Y, beta, nu: float, lam: float, spec: WeightSpec = WeightSpec()) -> float:
    X, Y = _check_xy(X, Y)
    Xw, Yw = _reweight(X, Y, spec)
    beta = np.asarray(beta, float)
    return float(huber_loss(Yw - Xw @ beta, nu).mean() + lam * np.abs(beta).sum())


def lambda_max(X, Y, nu: float, spec: WeightSpec = WeightSpec()) -> float:
    """Smallest lambda with beta = 0 optimal: ``|grad at 0|_inf``."""
    return float(np.max(np.abs(smooth_gradient(X, Y, np.zeros(np.shape(X)[1]), nu, spec))))


def default_nu_grid(X, Y) -> np.ndarray:
    Y = np.asarray(Y, float)
    n, p = np.shape(X)
    scale = MAD_SCALE * np.median(np.abs(Y - np.median(Y)))
    if scale <= 0:
        scale = 1.0
    return scale * math.sqrt(n / math.log(max(p, 2))) * np.array([0.25, 0.5, 1.0, 2.0, 4.0])


def default_lambda_grid(lmax: float, num: int = 10, ratio: float = 1e-3) -> np.ndarray:
    return lmax * np.geomspace(1.0, ratio, num)


@dataclass
class TuneResult:
    nu: float
    lam: float
    fit: FitResult
    holdout_error: float
    errors: dict[tuple[float, float], float]
    max_kkt: float  # worst KKT residual among converged fits


def tune(
    X,
    Y,
    nu_grid=None,
    lambda_grid=None,
    holdout=None,
    weight: WeightSpec = WeightSpec(),
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> TuneResult:
    """Grid search over (nu, lambda) by holdout mean squared prediction error.

    ``lambda_grid=None`` uses a 10-point geometric grid from each nu's zero
    threshold down by 1e3.  Non-converged fits are not eligible.  Ties go to
    the smaller nu, then the smaller lambda.
    """
    X, Y = _check_xy(X, Y)
    if holdout is None:
        raise InvalidInput("holdout (X', Y') is required")
    Xh, Yh = _check_xy(*holdout)
    nus = np.unique(np.asarray(default_nu_grid(X, Y) if nu_grid is None else nu_grid, float))
    if nus.size == 0:
        raise InvalidInput("empty nu grid")
    Xw, Yw = _reweight(X, Y, weight)
    L = lipschitz(Xw)
    p = X.shape[1]
    best = None
    errors = {}
    max_kkt = 0.0
    for nu in nus:
        if lambda_grid is None:
            lmax = float(np.max(np.abs(Xw.T @ huber_score(Yw, nu)))) / X.shape[0]
            lams = default_lambda_grid(lmax)
        else:
            lams = np.asarray(lambda_grid, float)
        lams = np.unique(lams)[::-1]  # descending for warm starts
        if lams.size == 0:
            raise InvalidInput("empty lambda grid")
        beta = np.zeros(p)
        for lam in lams:
            cfg = HuberConfig(nu=float(nu), lam=float(lam), weight=weight, tol=tol, max_iter=max_iter)
            res = _fit_weighted(Xw, Yw, cfg, beta0=beta, L=L)
            beta = res.beta_hat
            if not res.converged:
                continue
            max_kkt = max(max_kkt, res.kkt_residual)
            err = float(np.mean((Yh - Xh @ res.beta_hat) ** 2))
            errors[(float(nu), float(lam))] = err
            key = (err, float(nu), float(lam))
            if best is None or key < best[0]:
                best = (key, res)
    if best is None:
        raise TuningFailed("no grid point converged")
    (err, nu, lam), res = best
    return TuneResult(nu=nu, lam=lam, fit=res, holdout_error=err, errors=errors, max_kkt=max_kkt)
