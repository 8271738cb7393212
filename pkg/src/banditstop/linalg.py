"""Small dense symmetric-matrix helpers shared by policies and estimators."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ContractError

# A Gram matrix counts as singular when its smallest eigenvalue is at most
# RTOL times its largest eigenvalue (floored at 1), so all-zero and
# rank-deficient designs are both caught.
GRAM_SINGULARITY_RTOL = 1e-10


def is_invertible_gram(gram: np.ndarray) -> bool:
    eigs = np.linalg.eigvalsh(gram)
    return bool(eigs[0] > GRAM_SINGULARITY_RTOL * max(eigs[-1], 1.0))


def solve_spd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` for symmetric positive definite input via Cholesky."""
    cho = scipy.linalg.cho_factor(matrix, lower=True, check_finite=False)
    return scipy.linalg.cho_solve(cho, rhs, check_finite=False)


def inverse_spd(matrix: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix, via factorization."""
    inv = solve_spd(matrix, np.eye(matrix.shape[0]))
    return 0.5 * (inv + inv.T)


def require_symmetric(matrix: np.ndarray, what: str = "matrix") -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError(f"{what} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if float(np.max(np.abs(m - m.T))) > 1e-9 * scale:
        raise ContractError(f"{what} is not symmetric within 1e-9")
    return m


def draw_gaussian(
    rng: np.random.Generator, mean: np.ndarray, cov: np.ndarray, size: int
) -> np.ndarray:
    """Multivariate normal draws with a Cholesky factor (eigendecomposition fallback)."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # PSD but numerically semi-definite: clamp tiny negative eigenvalues.
        vals, vecs = np.linalg.eigh(cov)
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    z = rng.standard_normal((size, mean.shape[0]))
    return mean + z @ factor.T
