"""Regularized incomplete gamma functions.

Series expansion below ``x < a + 1`` and a modified-Lentz continued fraction
above it, following the classic split. Both routines accept scalars or
broadcastable arrays and iterate element-wise until every entry converges.
"""

import numpy as np
from scipy.special import gammaln

from .exceptions import ConvergenceError

MAX_ITER = 500
_EPS = np.finfo(float).eps
_FPMIN = np.finfo(float).tiny / _EPS


def _log_prefactor(a, x):
    # log(x^a e^-x / Gamma(a)); x > 0 guaranteed by callers
    return a * np.log(x) - x - gammaln(a)


def _series_p(a, x):
    """Lower regularized gamma by its power series (valid for x < a + 1)."""
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    active = np.ones(a.shape, dtype=bool)
    for _ in range(MAX_ITER):
        ap = ap + 1.0
        term = np.where(active, term * x / ap, 0.0)
        total = total + term
        active &= np.abs(term) >= np.abs(total) * _EPS
        if not active.any():
            break
    else:
        raise ConvergenceError(
            "incomplete gamma series did not converge",
            {"a": a[active].tolist(), "x": x[active].tolist()},
        )
    return total * np.exp(_log_prefactor(a, x))


def _continued_fraction_q(a, x):
    """Upper regularized gamma by continued fraction (valid for x >= a + 1)."""
    b = x + 1.0 - a
    c = np.full(a.shape, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(a.shape, dtype=bool)
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h = h * delta
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            break
    else:
        raise ConvergenceError(
            "incomplete gamma continued fraction did not converge",
            {"a": a[active].tolist(), "x": x[active].tolist()},
        )
    return np.exp(_log_prefactor(a, x)) * h


def _incomplete_gamma(a, x, upper):
    a_arr, x_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    scalar = a_arr.ndim == 0
    a_arr = np.atleast_1d(a_arr).astype(float)
    x_arr = np.atleast_1d(x_arr).astype(float)
    if np.any(a_arr < 0) or np.any(x_arr < 0) or np.any(np.isnan(a_arr + x_arr)):
        raise ValueError("incomplete gamma requires shape >= 0 and x >= 0")

    p = np.empty(a_arr.shape)
    q = np.empty(a_arr.shape)
    # G(0, x) is taken as 1 so the count-model difference needs no n = 0 case
    zero_shape = a_arr == 0
    zero_x = (x_arr == 0) & ~zero_shape
    p[zero_shape], q[zero_shape] = 1.0, 0.0
    p[zero_x], q[zero_x] = 0.0, 1.0

    rest = ~(zero_shape | zero_x)
    use_series = rest & (x_arr < a_arr + 1.0)
    use_cf = rest & ~use_series
    if use_series.any():
        p[use_series] = _series_p(a_arr[use_series], x_arr[use_series])
        q[use_series] = 1.0 - p[use_series]
    if use_cf.any():
        q[use_cf] = _continued_fraction_q(a_arr[use_cf], x_arr[use_cf])
        p[use_cf] = 1.0 - q[use_cf]

    out = q if upper else p
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def regularized_lower_incomplete_gamma(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a).

    Parameters
    ----------
    a : float or array_like
        Shape, ``a >= 0``. ``a == 0`` returns 1 by convention.
    x : float or array_like
        Upper integration limit, ``x >= 0``.

    Returns
    -------
    float or ndarray
        Values in [0, 1]; a float when both inputs are scalars.

    Raises
    ------
    ConvergenceError
        If the series or continued fraction needs more than 500 iterations.
    """
    return _incomplete_gamma(a, x, upper=False)


def regularized_upper_incomplete_gamma(a, x):
    """Q(a, x) = 1 - P(a, x), computed without the subtraction where possible."""
    return _incomplete_gamma(a, x, upper=True)


def log_regularized_lower_incomplete_gamma(a, x):
    """log P(a, x) for scalar ``a > 0``, ``x > 0``.

    Stays accurate when P is tiny (the series branch is evaluated in log space).
    """
    a = float(a)
    x = float(x)
    if x < a + 1.0:
        ap, term, total = a, 1.0 / a, 1.0 / a
        for _ in range(MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                break
        else:
            raise ConvergenceError("incomplete gamma series did not converge", {"a": a, "x": x})
        return float(np.log(total) + _log_prefactor(a, x))
    return float(np.log1p(-regularized_upper_incomplete_gamma(a, x)))
