"""Huber M-estimation of the mean of a high-dimensional heavy-tailed series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import InvalidInput

MAD_SCALE = 1.4826


class InvalidParameter(ValueError):
    pass


def huber_score(x, nu: float):
    """Clip ``x`` to ``[-nu, nu]``."""
    if not nu > 0:
        raise InvalidParameter(f"nu must be positive, got {nu}")
    return np.clip(x, -nu, nu)


def _score_sums(X: np.ndarray, a: np.ndarray, nu: float) -> np.ndarray:
    return np.clip(X - a, -nu, nu).sum(axis=0)


def _bisect(X, nu, lo, hi, strict: bool, tol: np.ndarray) -> np.ndarray:
    # strict=True: locate sup{a : S(a) > 0}; strict=False: inf{a : S(a) < 0}
    for _ in range(400):
        width = hi - lo
        if np.all(width <= tol):
            break
        mid = 0.5 * (lo + hi)
        stuck = (mid <= lo) | (mid >= hi)
        S = _score_sums(X, mid, nu)
        go_right = S > 0 if strict else S >= 0
        lo = np.where(go_right & ~stuck, mid, lo)
        hi = np.where(~go_right & ~stuck, mid, hi)
        if np.all(stuck | (hi - lo <= tol)):
            break
    return 0.5 * (lo + hi)


def huber_roots(X, nu: float, tol: float = 1e-10) -> np.ndarray:
    """Columnwise roots of ``a -> sum_i clip(X_ij - a, -nu, nu)``.

    The score is continuous and non-increasing, so its zero set is an interval
    [L, R]; both ends are found by bisection and the midpoint returned.  The
    bracket is ``[min x - nu, max x + nu]``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise InvalidInput("empty sample")
    if not nu > 0:
        raise InvalidParameter(f"nu must be positive, got {nu}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("non-finite samples")
    lo = X.min(axis=0) - nu
    hi = X.max(axis=0) + nu
    step = np.full(X.shape[1], tol * min(1.0, nu))
    left = _bisect(X, nu, lo.copy(), hi.copy(), True, step)
    right = _bisect(X, nu, lo.copy(), hi.copy(), False, step)
    return 0.5 * (left + right)


def huber_mean_scalar(samples, nu: float) -> float:
    x = np.asarray(samples, dtype=float).ravel()
    return float(huber_roots(x, nu)[0])


@dataclass
class HuberMeanResult:
    mu_hat: np.ndarray
    nu: float
    score_residual: np.ndarray  # |sum_i phi_nu(X_ij - mu_hat_j)| per coordinate


def robust_scale(X) -> float:
    """Median over coordinates of the MAD scale (Gaussian-consistent)."""
    X = np.asarray(X, dtype=float)
    med = np.median(X, axis=0)
    mad = MAD_SCALE * np.median(np.abs(X - med), axis=0)
    return float(np.median(mad))


def auto_nu(X, c: float = 1.0) -> float:
    """``c * scale * sqrt(n / log p)``; log p is floored at log 2 so p = 1 works."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    scale = robust_scale(X)
    if scale <= 0:
        scale = 1.0
    return c * scale * math.sqrt(n / math.log(max(p, 2)))


def huber_mean_vector(X, nu: float | str = "auto", c: float = 1.0) -> HuberMeanResult:
    X = np.asarray(getattr(X, "X", X), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise InvalidInput("need at least two observations")
    nu_val = auto_nu(X, c) if nu == "auto" else float(nu)
    mu = huber_roots(X, nu_val)
    resid = np.abs(_score_sums(X, mu, nu_val))
    return HuberMeanResult(mu_hat=mu, nu=nu_val, score_residual=resid)


def mean_error_bound(n: float, p: float, gamma: float, mu2: float, tau: float, C: float = 1.0) -> float:
    """``C (gamma + mu2) tau sqrt(log p / n)``."""
    return C * (gamma + mu2) * tau * math.sqrt(math.log(p) / n)
