"""Special functions for the distribution diagnostics.

The regularized lower incomplete gamma function is evaluated by its power
series for ``x < a + 1`` and by a Lentz continued fraction for the upper
function otherwise; both run to machine precision. The error function and
the normal and chi-square CDFs are expressed through it.
"""
import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 1000


def _prefactor(a, x):
    return np.exp(-x + a * np.log(x) - math.lgamma(a))


def _series(a, x):
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term = term * x / ap
        total += term
        if np.all(np.abs(term) < np.abs(total) * _EPS):
            break
    return total * _prefactor(a, x)


def _continued_fraction(a, x):
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _EPS):
            break
    return h * _prefactor(a, x)


def gammainc(a, x):
    """Regularized lower incomplete gamma ``P(a, x)`` for ``a > 0``."""
    if a <= 0:
        raise ValueError("a must be positive")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    pos = x > 0
    low = pos & (x < a + 1.0)
    high = pos & ~low
    if np.any(low):
        out[low] = _series(a, x[low])
    if np.any(high):
        out[high] = 1.0 - _continued_fraction(a, x[high])
    out = np.clip(out, 0.0, 1.0)
    return out[0] if scalar else out


def erf(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * gammainc(0.5, x * x)


def normal_cdf(x, variance=1.0):
    """CDF of ``N(0, variance)``."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=float) / math.sqrt(2.0 * variance)))


def chi2_cdf(x, df):
    x = np.asarray(x, dtype=float)
    return gammainc(0.5 * df, np.maximum(x, 0.0) * 0.5)


def chi2_quantile_2df(level):
    """Closed-form chi-square quantile for two degrees of freedom."""
    return -2.0 * math.log1p(-level)
