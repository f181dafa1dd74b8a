"""Simulators: innovations, VAR(1) and linear processes, AR(1) errors, designs.

Randomness always comes from an explicit ``numpy.random.Generator``.  The
package convention is PCG64 seeded with a 64-bit integer (see ``make_rng``);
replication ``r`` of an experiment uses seed ``base_seed + r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.signal import lfilter

from .linalg import InvalidInput, NonStationary, as_matrix, dependence_profile, spectral_radius


class InvalidDesign(ValueError):
    pass


class InvalidModel(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def log_sparsity(p: int) -> int:
    """``floor(log p)`` with the natural log, floored at 1."""
    return max(1, int(math.floor(math.log(p))))


@dataclass(frozen=True)
class InnovationDist:
    kind: str = "student_t"  # "gaussian" or "student_t"
    df: float = 5.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t"):
            raise ValueError(f"unknown innovation kind {self.kind!r}")
        if self.kind == "student_t" and not self.df > 2:
            raise ValueError("standardized t needs df > 2")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return self.sigma * rng.standard_normal(size)
        # unit variance: raw t has variance df / (df - 2)
        return rng.standard_t(self.df, size) * math.sqrt((self.df - 2.0) / self.df)

    @property
    def variance(self) -> float:
        return self.sigma**2 if self.kind == "gaussian" else 1.0

    def describe(self) -> str:
        return f"gaussian(sigma={self.sigma})" if self.kind == "gaussian" else f"t(df={self.df:g})"


GAUSSIAN = InnovationDist("gaussian")
T5 = InnovationDist("student_t", df=5.0)

DESIGN_KINDS = ("banded", "block_diag", "toeplitz", "random_sparse", "example_shift")


@dataclass(frozen=True)
class VarDesign:
    """Recipe for a p x p transition matrix.

    ``s`` defaults to floor(log p).  ``lam`` is the decay base for banded,
    toeplitz and example_shift; ``B`` is the shift width of example_shift.
    """

    kind: str
    lam: float = 0.5
    s: int | None = None
    B: int = 3
    stabilize: bool = True

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise InvalidDesign(f"unknown design {self.kind!r}; choose from {DESIGN_KINDS}")

    @property
    def is_random(self) -> bool:
        return self.kind in ("block_diag", "random_sparse")


@dataclass
class StabilizedDesign:
    design: VarDesign
    A: np.ndarray
    scale: float  # divisor applied to the raw recipe (1.0 if none)
    draws: dict[str, Any] = field(default_factory=dict)


def shift_matrix(lam: float, B: int, p: int) -> np.ndarray:
    """``a_ij = lam**(j - i + 1)`` for ``0 <= j - i <= B - 1``, else 0."""
    if not 1 <= B <= p:
        raise InvalidDesign(f"shift width B={B} must lie in [1, p={p}]")
    A = np.zeros((p, p))
    for d in range(B):
        idx = np.arange(p - d)
        A[idx, idx + d] = lam ** (d + 1)
    return A


def _banded(lam: float, s: int, p: int) -> np.ndarray:
    i, j = np.indices((p, p))
    gap = np.abs(i - j)
    return np.where(gap <= s, lam**gap, 0.0)


def build(design: VarDesign, p: int, rng: np.random.Generator | None = None) -> StabilizedDesign:
    """Materialize a design; see ``build_design`` for the matrix-only form."""
    if p < 2:
        raise InvalidDesign("p must be at least 2")
    s = design.s if design.s is not None else log_sparsity(p)
    draws: dict[str, Any] = {"s": s}
    kind = design.kind
    needs_scaling = design.stabilize and kind in ("banded", "toeplitz", "random_sparse")

    if kind == "banded":
        if s >= p:
            raise InvalidDesign(f"band width s={s} must be < p={p}")
        A = _banded(design.lam, s, p)
    elif kind == "toeplitz":
        A = _banded(design.lam, p, p)
    elif kind == "example_shift":
        A = shift_matrix(design.lam, design.B, p)
    elif kind == "block_diag":
        if rng is None:
            raise InvalidDesign("block_diag draws block coefficients and needs an rng")
        if s < 1:
            raise InvalidDesign("block size must be >= 1")
        starts = list(range(0, p, s))
        lams = rng.uniform(-0.8, 0.8, size=len(starts))
        A = np.zeros((p, p))
        for start, lam_i in zip(starts, lams):
            size = min(s, p - start)  # last block truncated to the remainder
            A[start:start + size, start:start + size] = shift_matrix(lam_i, min(2, size), size)
        draws["block_lams"] = lams.tolist()
    else:  # random_sparse
        if rng is None:
            raise InvalidDesign("random_sparse draws its support and needs an rng")
        n_off = p * (p - 1)
        k = min(s * s, n_off)
        off_i, off_j = np.nonzero(~np.eye(p, dtype=bool))
        for _ in range(100):
            A = np.diag(rng.uniform(-0.8, 0.8, size=p))
            pick = rng.choice(n_off, size=k, replace=False)
            A[off_i[pick], off_j[pick]] = rng.standard_normal(k)
            if not needs_scaling or spectral_radius(A) > 1e-12:
                break
        else:
            raise InvalidDesign("could not draw a random_sparse design with nonzero spectral radius")
        draws["support"] = sorted(zip(off_i[pick].tolist(), off_j[pick].tolist()))

    scale = 1.0
    if needs_scaling:
        radius = spectral_radius(A)
        if radius <= 0:
            raise InvalidDesign("cannot stabilize a nilpotent design")
        scale = 2.0 * radius
        A = A / scale
    return StabilizedDesign(design=design, A=A, scale=scale, draws=draws)


def build_design(design: VarDesign, p: int, rng: np.random.Generator | None = None) -> np.ndarray:
    return build(design, p, rng).A


@dataclass
class SeriesSample:
    """Rows X_0, ..., X_n of a p-dimensional series."""

    X: np.ndarray
    seed: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0] - 1

    @property
    def p(self) -> int:
        return self.X.shape[1]


def default_burn_in(A: np.ndarray) -> int:
    try:
        tau = dependence_profile(A, 0.5, kmax=2000).tau
    except Exception:
        tau = 100
    return max(200, 10 * tau)


def simulate_var(
    A,
    n: int,
    innov: InnovationDist = T5,
    burn_in: int | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> SeriesSample:
    """VAR(1) ``X_i = A X_{i-1} + eps_i`` started at zero ``burn_in`` steps early.

    Innovations are drawn as one ``(burn_in + n + 1, p)`` block, so with A = 0
    the returned rows are exactly the last n + 1 rows of that block.
    """
    A = as_matrix(A, square=True)
    radius = spectral_radius(A)
    if radius >= 1.0:
        raise NonStationary(f"spectral radius {radius:.6g} >= 1")
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    if burn_in is None:
        burn_in = default_burn_in(A)
    p = A.shape[0]
    eps = innov.draw(rng, (burn_in + n + 1, p))
    X = np.empty_like(eps)
    At = A.T
    prev = np.zeros(p)
    for t in range(eps.shape[0]):
        prev = prev @ At + eps[t]
        X[t] = prev
    return SeriesSample(
        X=X[burn_in:].copy(),
        seed=seed,
        meta={"model": "var1", "innovations": innov.describe(), "burn_in": burn_in},
    )


def simulate_var_batch(A, n: int, reps_eps: np.ndarray) -> np.ndarray:
    """Run the VAR recursion on a stack of innovation blocks ``(reps, T, p)``."""
    A = as_matrix(A, square=True)
    out = np.empty_like(reps_eps)
    prev = np.zeros((reps_eps.shape[0], reps_eps.shape[2]))
    At = A.T
    for t in range(reps_eps.shape[1]):
        prev = prev @ At + reps_eps[:, t, :]
        out[:, t, :] = prev
    return out


def simulate_linear_process(
    coeffs: Sequence[np.ndarray],
    mu=None,
    n: int = 100,
    innov: InnovationDist = T5,
    K: int | None = None,
    rng: np.random.Generator | None = None,
    profile=None,
    seed: int | None = None,
) -> SeriesSample:
    """Finite moving-average approximation ``X_i = mu + sum_{k<=K} A_k eps_{i-k}``.

    Coefficients beyond those supplied are zero.  When a ``DependenceProfile``
    is passed, K must make the neglected tail ``gamma * rho0**(K/tau)`` < 1e-8.
    """
    coeffs = [as_matrix(c, square=True) for c in coeffs]
    if not coeffs:
        raise InvalidModel("need at least A_0")
    p = coeffs[0].shape[0]
    if not np.allclose(coeffs[0], np.eye(p), atol=1e-12, rtol=0):
        raise InvalidModel("A_0 must be the identity")
    if K is None:
        K = len(coeffs) - 1
    if profile is not None:
        tail = profile.gamma * profile.rho0 ** (K / profile.tau)
        if tail >= 1e-8:
            raise InvalidModel(f"truncation K={K} leaves tail bound {tail:.3g} >= 1e-8")
    mu = np.zeros(p) if mu is None else np.asarray(mu, dtype=float)
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    eps = innov.draw(rng, (n + 1 + K, p))
    X = np.tile(mu, (n + 1, 1))
    for k, Ak in enumerate(coeffs[: K + 1]):
        block = eps[K - k: K - k + n + 1]
        X += block if k == 0 else block @ Ak.T
    return SeriesSample(X=X, seed=seed, meta={"model": "linear_process", "K": K})


def simulate_ar_error(
    rho: float,
    n: int,
    innov: InnovationDist = T5,
    rng: np.random.Generator | None = None,
    burn_in: int = 500,
    seed: int | None = None,
) -> np.ndarray:
    """AR(1) errors ``xi_i = rho * xi_{i-1} + eta_i`` (MA weights rho**k)."""
    if not abs(rho) < 1:
        raise NonStationary(f"|rho| = {abs(rho)} >= 1")
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    eta = innov.draw(rng, burn_in + n)
    if rho == 0:
        return eta[burn_in:].copy()
    return lfilter([1.0], [1.0, -rho], eta)[burn_in:]


@dataclass
class RegressionDataset:
    X: np.ndarray
    Y: np.ndarray
    beta_star: np.ndarray
    xi: np.ndarray
    rho: float

    @property
    def s(self) -> int:
        return int(np.count_nonzero(self.beta_star))


def make_regression_dataset(p: int, n: int, rng: np.random.Generator) -> RegressionDataset:
    """Toeplitz(0.5) VAR covariates with t(5) innovations, AR(1) t(5) errors.

    ``beta_star`` has its first ``2 floor(log p)`` entries equal to one.  The
    AR coefficient is drawn from Unif(-0.8, 0.8) on every call.
    """
    if p < 4 or n < 1:
        raise InvalidInput("need p >= 4 and n >= 1")
    A = build_design(VarDesign("toeplitz", lam=0.5), p)
    X = simulate_var(A, n - 1, T5, rng=rng).X
    rho = float(rng.uniform(-0.8, 0.8))
    xi = simulate_ar_error(rho, n, T5, rng=rng)
    s = min(p, 2 * log_sparsity(p))
    beta = np.zeros(p)
    beta[:s] = 1.0
    Y = X @ beta + xi
    return RegressionDataset(X=X, Y=Y, beta_star=beta, xi=xi, rho=rho)


def stationary_covariance(A, noise_var: float = 1.0, tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """Fixed point of ``S = A S A^T + noise_var * I`` by plain iteration."""
    A = as_matrix(A, square=True)
    S = noise_var * np.eye(A.shape[0])
    for _ in range(max_iter):
        nxt = A @ S @ A.T + noise_var * np.eye(A.shape[0])
        if np.max(np.abs(nxt - S)) < tol:
            return nxt
        S = nxt
    raise RuntimeError("Lyapunov iteration did not converge")
