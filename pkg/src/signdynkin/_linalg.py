"""Dense symmetric positive-definite helpers built on LAPACK potrf/potri."""

import numpy as np
from scipy.linalg import lapack

from .errors import NotPositiveDefiniteError, StructuralError


def as_square(m, name="matrix"):
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"{name} must be square, got shape {a.shape}")
    return a


def cholesky_lower(a):
    """Lower Cholesky factor of ``a``; raises with the failing pivot index."""
    a = as_square(a)
    if a.shape[0] == 0:
        return a.copy()
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise StructuralError(f"dpotrf rejected argument {-info}")
    return c


def spd_inverse(a):
    """Inverse of a symmetric positive-definite matrix via its Cholesky factor."""
    c = cholesky_lower(a)
    if c.shape[0] == 0:
        return c
    inv, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise NotPositiveDefiniteError(max(info - 1, 0))
    inv = np.tril(inv)
    return inv + np.tril(inv, -1).T


def spd_sqrt_det_ratio(a, b):
    """``sqrt(det a / det b)`` for positive-definite ``a`` and ``b``."""
    cholesky_lower(a), cholesky_lower(b)
    with np.errstate(over="ignore", under="ignore"):
        da, db = np.linalg.det(a), np.linalg.det(b)
    if np.isfinite(da) and np.isfinite(db) and da > 1e-290 and db > 1e-290:
        return float(np.sqrt(da / db))
    # log route once the determinants leave the float range
    return float(np.exp(0.5 * (np.linalg.slogdet(a)[1] - np.linalg.slogdet(b)[1])))
