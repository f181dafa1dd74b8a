"""Dense linear-algebra kernel: norms, spectral quantities and dependence parameters.

All functions take array-likes and return plain floats or small dataclasses.
Eigen/singular values go through LAPACK (numpy.linalg); at the dimensions used
here (p <= 500) that is both exact and cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYM_TOL = 1e-10


class InvalidInput(ValueError):
    pass


class ShapeError(ValueError):
    pass


class NonStationary(ValueError):
    pass


class HorizonExceeded(RuntimeError):
    pass


def as_matrix(A, *, square: bool = False) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    return A


def operator_norm_2(A) -> float:
    """Largest singular value of ``A``."""
    A = as_matrix(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def spectral_radius(A) -> float:
    """Maximum modulus of the eigenvalues of a square matrix."""
    A = as_matrix(A, square=True)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def min_eigenvalue_spd(A) -> float:
    A = as_matrix(A, square=True)
    if np.max(np.abs(A - A.T), initial=0.0) > SYM_TOL:
        raise InvalidInput("matrix is not symmetric within 1e-10")
    return float(np.linalg.eigvalsh(A)[0])


@dataclass(frozen=True)
class MatrixNorms:
    l1_induced: float    # max column abs sum
    linf_induced: float  # max row abs sum
    frobenius: float
    max_abs: float
    entry_l1: float      # sum of all |a_ij|


def matrix_norms(A) -> MatrixNorms:
    A = as_matrix(A)
    absA = np.abs(A)
    if absA.size == 0:
        return MatrixNorms(0.0, 0.0, 0.0, 0.0, 0.0)
    return MatrixNorms(
        l1_induced=float(absA.sum(axis=0).max()),
        linf_induced=float(absA.sum(axis=1).max()),
        frobenius=float(np.sqrt((A * A).sum())),
        max_abs=float(absA.max()),
        entry_l1=float(absA.sum()),
    )


@dataclass(frozen=True)
class DependenceProfile:
    """Geometric-decay certificate ``||A^k|| <= gamma * rho0**(k / tau)``.

    ``gamma`` is the constructive value ``max_{k < tau} ||A^k|| / rho0``.  It
    is an upper-bound choice, not the smallest gamma that works: for a
    symmetric A with ||A|| = rho0 it returns 1/rho0 rather than 1.
    """

    rho0: float
    tau: int
    gamma: float
    norms: np.ndarray  # ||A^k|| for k = 0..kmax

    def envelope(self) -> np.ndarray:
        k = np.arange(len(self.norms))
        return self.gamma * self.rho0 ** (k / self.tau)


def power_norms(A, kmax: int) -> np.ndarray:
    """``||A^k||_2`` for k = 0..kmax, one fresh multiplication per lag."""
    A = as_matrix(A, square=True)
    out = np.empty(kmax + 1)
    P = np.eye(A.shape[0])
    for k in range(kmax + 1):
        out[k] = operator_norm_2(P)
        if k < kmax:
            P = P @ A
            scale = np.max(np.abs(P), initial=0.0)
            if scale > 0 and (scale < 1e-250 or scale > 1e250):
                raise InvalidInput("matrix powers left the representable range")
    return out


def dependence_profile(A, rho0: float = 0.5, kmax: int = 200) -> DependenceProfile:
    A = as_matrix(A, square=True)
    if not 0.0 < rho0 < 1.0:
        raise InvalidInput(f"rho0 must lie in (0, 1), got {rho0}")
    radius = spectral_radius(A)
    if radius >= 1.0:
        raise NonStationary(f"spectral radius {radius:.6g} >= 1")
    norms = power_norms(A, kmax)
    hits = np.nonzero(norms[1:] <= rho0)[0]
    if hits.size == 0:
        raise HorizonExceeded(
            f"||A^k|| stays above rho0={rho0} for k <= {kmax} "
            f"(last value {norms[-1]:.4g})"
        )
    tau = int(hits[0]) + 1
    gamma = float(norms[:tau].max() / rho0)
    return DependenceProfile(rho0=float(rho0), tau=tau, gamma=gamma, norms=norms)
