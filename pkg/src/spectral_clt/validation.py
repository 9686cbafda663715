"""Input validation helpers shared by the estimators and functions."""
import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError


def check_matrix(M, *, square=False, name="matrix"):
    M = check_array(M, dtype=np.float64, ensure_2d=True, ensure_min_samples=1,
                    input_name=name)
    if square and M.shape[0] != M.shape[1]:
        raise DomainError(f"{name} must be square, got shape {M.shape}")
    return M


def check_symmetric_matrix(M, *, tol=1e-12, name="matrix"):
    M = check_matrix(M, square=True, name=name)
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > tol * scale:
        raise DomainError(f"{name} must be symmetric")
    return M


def check_probability_vector(p, *, atol=1e-12, name="probabilities"):
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0 or not np.all(np.isfinite(p)):
        raise DomainError(f"{name} must be a non-empty finite vector")
    if np.any(p <= 0):
        raise DomainError(f"{name} must be strictly positive")
    if abs(p.sum() - 1.0) > atol:
        raise DomainError(f"{name} must sum to 1 (got {p.sum()!r})")
    return p


def check_points(X, *, min_samples=1, name="points"):
    return check_array(X, dtype=np.float64, ensure_min_samples=min_samples,
                       input_name=name)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_open_unit(value, name, upper=1.0):
    value = float(value)
    if not 0.0 < value < upper:
        raise DomainError(f"{name} must lie in (0, {upper}), got {value}")
    return value
