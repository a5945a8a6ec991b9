"""Path-sum similarity and diffusion kernels over a base similarity matrix."""
from __future__ import annotations

import numpy as np

from ..errors import DataError, DivergenceError, NonSymmetricError

SYM_TOL = 1e-12


def _matrix(B):
    B = getattr(B, "B", B)
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DataError("base similarity matrix must be square")
    return B


def _check_symmetric(B):
    if not np.allclose(B, B.T, rtol=0, atol=SYM_TOL * max(1.0, np.abs(B).max(initial=0.0))):
        raise NonSymmetricError("base similarity matrix is not symmetric")


def path_sum_similarity(B, k: int) -> np.ndarray:
    """Sum over all walks of length ``k`` of the product of base similarities,
    i.e. the k-th matrix power."""
    if k < 1:
        raise DataError("walk length k must be >= 1")
    return np.linalg.matrix_power(_matrix(B), k)


def spectral_radius(B) -> float:
    B = _matrix(B)
    if B.size == 0:
        return 0.0
    _check_symmetric(B)
    return float(np.abs(np.linalg.eigvalsh(B)).max())


def _eig(B):
    B = _matrix(B)
    _check_symmetric(B)
    # symmetrize exactly so eigh sees a symmetric matrix
    return np.linalg.eigh((B + B.T) / 2)


def _from_eig(vals, vecs, f):
    K = (vecs * f(vals)) @ vecs.T
    return (K + K.T) / 2


def exp_kernel(B, lam: float) -> np.ndarray:
    """Exponential diffusion kernel ``exp(lam * B)``."""
    vals, vecs = _eig(B)
    return _from_eig(vals, vecs, lambda v: np.exp(lam * v))


def von_neumann_kernel(B, lam: float) -> np.ndarray:
    """Von Neumann diffusion kernel ``(I - lam * B)^-1``; requires
    ``lam * rho(B) < 1``."""
    vals, vecs = _eig(B)
    rho = float(np.abs(vals).max(initial=0.0))
    if abs(lam) * rho >= 1:
        raise DivergenceError(
            f"von Neumann kernel diverges: lambda * rho(B) = {abs(lam) * rho:.6g} >= 1")
    return _from_eig(vals, vecs, lambda v: 1.0 / (1.0 - lam * v))
