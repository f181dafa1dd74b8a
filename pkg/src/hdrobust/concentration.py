"""Bernstein-type tail bounds for linear processes and their Monte Carlo check.

For a bounded transformation G with Lipschitz weights g (sum g = 1) of a
stationary linear process, the tail of ``sum_{i<=n} G(X_i) - E G(X_i)`` is
bounded by ``2 exp(-x^2 / (C1 n sigma^2 tau^2 gamma^2 + C2 tau M x))`` where
C1, C2 depend only on rho0.  This module evaluates that bound and estimates
the left-hand side by simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import DependenceProfile, NonStationary, as_matrix, dependence_profile, spectral_radius
from .robust_mean import huber_mean_vector, mean_error_bound
from .sim import InnovationDist, make_rng, simulate_var, simulate_var_batch

E = math.e


class DominationFailure(AssertionError):
    pass


def c1(rho0: float) -> float:
    return 16.0 * E**2 / (math.sqrt(2.0 * math.pi) * rho0**4 * math.log(1.0 / rho0) ** 3)


def c2(rho0: float) -> float:
    return 8.0 * E / math.log(1.0 / rho0)


@dataclass(frozen=True)
class BoundParams:
    rho0: float
    tau: float
    gamma: float
    sigma: float
    M: float
    n: int

    def __post_init__(self):
        if not 0 < self.rho0 < 1:
            raise ValueError("rho0 must lie in (0, 1)")
        if self.tau < 1 or self.gamma < 1:
            raise ValueError("need tau >= 1 and gamma >= 1")
        if not (self.sigma > 0 and self.M > 0 and self.n >= 1):
            raise ValueError("need sigma > 0, M > 0, n >= 1")

    @property
    def C1(self) -> float:
        return c1(self.rho0)

    @property
    def C2(self) -> float:
        return c2(self.rho0)

    @classmethod
    def from_profile(cls, profile: DependenceProfile, sigma: float, M: float, n: int) -> "BoundParams":
        return cls(profile.rho0, profile.tau, max(profile.gamma, 1.0), sigma, M, n)


def _gauss_term(p: BoundParams) -> float:
    return p.C1 * p.n * p.sigma**2 * p.tau**2 * p.gamma**2


def bernstein_bound(x, params: BoundParams, clip: bool = False):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    val = 2.0 * np.exp(-(x * x) / (_gauss_term(params) + params.C2 * params.tau * params.M * x))
    if clip:
        val = np.minimum(val, 1.0)
    return val if val.ndim else float(val)


def bernstein_bound_expmoment(x, n, theta, gamma, tau, C3, C4):
    """Exponential-moment variant; C3 and C4 have no closed form and are supplied."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    val = 2.0 * np.exp(-(x * x) / (C3 * n * theta**2 * tau**2 * gamma**2 + C4 * gamma * tau * x))
    return val if val.ndim else float(val)


def classical_bernstein(x, n: int, var: float, M: float):
    """i.i.d. reference curve ``exp(-x^2 / (2 n var + 2 M x / 3))``."""
    x = np.asarray(x, dtype=float)
    return np.exp(-(x * x) / (2.0 * n * var + 2.0 * M * x / 3.0))


@dataclass(frozen=True)
class LipschitzTransform:
    """``G(x) = sum_j a_j clip(x_j, -M, M)``; Lipschitz weights ``|a_j|``."""

    a: np.ndarray
    M: float

    @property
    def g(self) -> np.ndarray:
        return np.abs(self.a)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.clip(X, -self.M, self.M) @ self.a


def clipped_linear_transform(a, M: float) -> LipschitzTransform:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if abs(np.abs(a).sum() - 1.0) > 1e-12:
        raise ValueError(f"|a|_1 must equal 1, got {np.abs(a).sum():.15g}")
    if not M > 0:
        raise ValueError("M must be positive")
    return LipschitzTransform(a=a.copy(), M=float(M))


@dataclass
class TailTable:
    x: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray  # clipped
    stderr: np.ndarray
    classical: np.ndarray
    params: BoundParams
    mean_G: float
    mean_G_se: float

    def rows(self):
        for i in range(len(self.x)):
            yield self.x[i], self.empirical[i], self.bound[i], self.stderr[i]

    def violations(self, k: float = 3.0) -> np.ndarray:
        return np.flatnonzero(self.empirical > self.bound + k * self.stderr)


def default_x_grid(n: int, sigma: float, gamma: float, tau: float) -> np.ndarray:
    return np.arange(1, 11) * 0.5 * math.sqrt(n * sigma**2) * gamma * tau


def _batch_means_se(v: np.ndarray, batches: int = 100) -> float:
    m = len(v) // batches
    means = v[: m * batches].reshape(batches, m).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def empirical_tail(
    A,
    G: LipschitzTransform,
    n: int,
    x_grid=None,
    reps: int = 10_000,
    seed: int = 0,
    innov: InnovationDist = InnovationDist("gaussian"),
    rho0: float = 0.5,
    burn_in: int = 200,
    prerun: int | None = None,
) -> TailTable:
    """Empirical survival function of ``S = sum_{i=1..n} (G(X_i) - E G)`` for a VAR(1).

    ``A = 0`` is the i.i.d. case.  E G is estimated from one stationary pre-run
    of length ``max(1e5 * tau, 1e5)`` (seed ``seed``); replication r uses seed
    ``seed + 1 + r``.  The pre-run's batch-means standard error enters
    ``stderr`` through the tail's sensitivity to a shift of ``n * se``.
    """
    A = as_matrix(A, square=True)
    if spectral_radius(A) >= 1:
        raise NonStationary("model is not stationary")
    if reps < 1000:
        raise ValueError("need reps >= 1000")
    p = A.shape[0]
    if G.a.shape[0] != p:
        raise ValueError("transform dimension does not match the model")
    profile = dependence_profile(A, rho0, kmax=max(200, 20 * p))
    sigma = math.sqrt(innov.variance)
    params = BoundParams.from_profile(profile, sigma, G.M, n)

    if prerun is None:
        prerun = int(1e5 * profile.tau)
    pre = simulate_var(A, prerun, innov, burn_in=burn_in, rng=make_rng(seed)).X
    g_pre = G(pre)
    mean_G = float(g_pre.mean())
    mean_se = _batch_means_se(g_pre)
    var_G = float(g_pre.var())

    eps = np.stack([innov.draw(make_rng(seed + 1 + r), (burn_in + n, p)) for r in range(reps)])
    paths = simulate_var_batch(A, n, eps)[:, burn_in:, :]
    S = G(paths.reshape(-1, p)).reshape(reps, n).sum(axis=1) - n * mean_G

    x = np.sort(np.asarray(default_x_grid(n, sigma, params.gamma, params.tau) if x_grid is None else x_grid, float))
    S_sorted = np.sort(S)

    def surv(t):
        return 1.0 - np.searchsorted(S_sorted, t, side="left") / reps

    emp = surv(x)
    binom = np.sqrt(emp * (1.0 - emp) / reps)
    shift = n * mean_se
    drift = 0.5 * np.abs(surv(x - shift) - surv(x + shift))
    stderr = np.sqrt(binom**2 + drift**2)
    bound = bernstein_bound(x, params, clip=True)
    classical = classical_bernstein(x, n, var_G, G.M)
    return TailTable(x, emp, np.atleast_1d(bound), stderr, classical, params, mean_G, mean_se)


def check_domination(table: TailTable, label: str = "", k: float = 3.0) -> None:
    bad = table.violations(k)
    if bad.size:
        i = bad[0]
        raise DominationFailure(
            f"{label}: empirical tail {table.empirical[i]:.4g} exceeds bound "
            f"{table.bound[i]:.4g} + {k}*{table.stderr[i]:.3g} at x={table.x[i]:.4g}"
        )


@dataclass
class MeanBoundTable:
    n: np.ndarray
    mean_error: np.ndarray
    sd_error: np.ndarray
    bound: np.ndarray
    slope: float


def mean_bound_check(
    n_list,
    p: int = 50,
    reps: int = 200,
    seed: int = 0,
    innov: InnovationDist = InnovationDist("student_t", df=5.0),
    C: float = 1.0,
    rho0: float = 0.5,
) -> MeanBoundTable:
    """l-inf error of the Huber mean for i.i.d. entries across sample sizes.

    The reported slope is the least-squares fit of log mean-error on log n.
    Replication r at sample size index k uses seed ``seed + k * reps + r``.
    """
    n_list = np.asarray(n_list, dtype=int)
    if np.any(np.diff(n_list) <= 0):
        raise ValueError("n_list must be increasing")
    profile = dependence_profile(np.zeros((p, p)), rho0, kmax=5)
    mu2 = math.sqrt(innov.variance)
    means, sds, bounds = [], [], []
    for k, n in enumerate(n_list):
        errs = np.empty(reps)
        for r in range(reps):
            X = innov.draw(make_rng(seed + k * reps + r), (int(n), p))
            errs[r] = np.max(np.abs(huber_mean_vector(X).mu_hat))
        means.append(errs.mean())
        sds.append(errs.std(ddof=1) if reps > 1 else 0.0)
        bounds.append(mean_error_bound(n, p, profile.gamma, mu2, profile.tau, C))
    means = np.array(means)
    slope = float(np.polyfit(np.log(n_list), np.log(means), 1)[0])
    return MeanBoundTable(n_list, means, np.array(sds), np.array(bounds), slope)
