"""Small input-validation helpers used across modules."""

import numpy as np

from .errors import InvalidInput, NotSPD


def as_matrix(A, name="A", dtype=float):
    """Return ``A`` as a finite square 2-D array or raise InvalidInput."""
    M = np.asarray(A, dtype=dtype)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise InvalidInput(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInput(f"{name} has non-finite entries")
    return M


def as_vector(v, name="v", n=None):
    """Return ``v`` as a finite 1-D float array, optionally of length ``n``."""
    x = np.asarray(v, dtype=float)
    if x.ndim != 1:
        raise InvalidInput(f"{name} must be a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise InvalidInput(f"{name} has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput(f"{name} has non-finite entries")
    return x


def is_symmetric(A, rtol=1e-12):
    nrm = np.linalg.norm(A)
    return np.linalg.norm(A - A.T) <= rtol * max(nrm, np.finfo(float).tiny)


def require_spd(A, name="A", exc=NotSPD):
    """Validate that ``A`` is symmetric positive definite.

    Returns the lower Cholesky factor so callers can reuse it.
    """
    M = as_matrix(A, name)
    if not is_symmetric(M, 1e-10):
        raise exc(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise exc(f"{name} is not positive definite") from None
