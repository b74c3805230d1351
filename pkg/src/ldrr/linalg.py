"""Dense linear-algebra helpers shared across the package.

Positive-definite systems go through Cholesky and raise typed errors
instead of surfacing raw LinAlgError; pseudo-inverses and rank checks
use a cutoff relative to the largest singular value.
"""

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError

# Relative singular-value cutoff used for pseudo-inverses and rank checks.
DEFAULT_REL_CUTOFF = 1e-10


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def is_symmetric(a: np.ndarray, tol: float = 1e-8) -> bool:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a))))
    return float(np.max(np.abs(a - a.T))) <= tol * scale

def cholesky_lower(a: np.ndarray, err: type[SingularMatrixError], what: str) -> np.ndarray:
    """Lower Cholesky factor of a symmetric PD matrix, or a typed error."""
    try:
        return scipy.linalg.cholesky(a, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise err(f"{what} is not positive definite: {exc}") from exc


def pd_solve(a: np.ndarray, b: np.ndarray, err: type[SingularMatrixError], what: str) -> np.ndarray:
    """Solve a x = b for symmetric positive definite a via Cholesky."""
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise err(f"{what} is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), b)


def pinv_cutoff(a: np.ndarray, rel_cutoff: float = DEFAULT_REL_CUTOFF) -> np.ndarray:
    """Moore-Penrose pseudo-inverse, zeroing singular values below
    rel_cutoff times the largest."""
    return np.linalg.pinv(a, rcond=rel_cutoff)


def numerical_rank(a: np.ndarray, rel_cutoff: float = DEFAULT_REL_CUTOFF) -> int:
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_cutoff * s[0]))


def psd_half_pinv(a: np.ndarray, rel_cutoff: float = DEFAULT_REL_CUTOFF) -> np.ndarray:
    """Inverse square root (pseudo) of a symmetric PSD matrix.

    Eigenvalues below rel_cutoff times the largest are treated as zero,
    so the result satisfies R a R = projector onto the retained range.
    """
    w, v = np.linalg.eigh(symmetrize(a))
    top = float(w[-1]) if w.size else 0.0
    keep = w > max(top, 0.0) * rel_cutoff
    inv_sqrt = np.zeros_like(w)
    inv_sqrt[keep] = 1.0 / np.sqrt(w[keep])
    return (v * inv_sqrt) @ v.T
