"""Poisson and gamma-count baselines.

The gamma count model has i.i.d. gamma(shape=alpha, rate=lambda)
interarrival times, so the n-th arrival is gamma(n*alpha, lambda) and

    P{N(t) = n} = G(n*alpha, lambda*t) - G((n+1)*alpha, lambda*t)

with G the regularized lower incomplete gamma function and G(0, x) = 1.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import ConvergenceError, DomainError
from .special import regularized_lower_incomplete_gamma, regularized_upper_incomplete_gamma


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class PoissonParams:
    rate: float
    exposure: float = 1.0

    def __post_init__(self):
        _positive("rate", self.rate)
        _positive("exposure", self.exposure)


@dataclass(frozen=True)
class GammaCountParams:
    rate: float
    alpha: float
    exposure: float = 1.0

    def __post_init__(self):
        _positive("rate", self.rate)
        _positive("alpha", self.alpha)
        _positive("exposure", self.exposure)


def poisson_logpmf_array(n, rate, exposure=1.0):
    n = np.asarray(n, dtype=float)
    mu = np.asarray(rate, dtype=float) * exposure
    return n * np.log(mu) - mu - gammaln(n + 1.0)


def poisson_pmf(params, n):
    """e^{-rate t} (rate t)^n / n!, evaluated in log space."""
    if int(n) != n or n < 0:
        raise DomainError(f"count must be a non-negative integer, got {n}")
    mu = params.rate * params.exposure
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def gamma_count_pmf_array(n, rate, alpha, exposure=1.0):
    """Element-wise gamma-count pmf.

    Uses the lower-gamma difference while both arguments sit in the lower
    tail and the upper-gamma difference otherwise, which keeps the
    subtraction between two small numbers.
    """
    n, rate, alpha = np.broadcast_arrays(
        np.asarray(n, dtype=float), np.asarray(rate, dtype=float), np.asarray(alpha, dtype=float)
    )
    x = rate * exposure
    lo_shape = n * alpha
    hi_shape = (n + 1.0) * alpha
    try:
        lower_tail = x < lo_shape
        p_lo = regularized_lower_incomplete_gamma(lo_shape, x)
        p_hi = regularized_lower_incomplete_gamma(hi_shape, x)
        q_lo = regularized_upper_incomplete_gamma(lo_shape, x)
        q_hi = regularized_upper_incomplete_gamma(hi_shape, x)
    except ConvergenceError as exc:
        exc.params = dict(exc.params, model="gamma_count")
        raise
    prob = np.where(lower_tail, p_lo - p_hi, q_hi - q_lo)
    return np.clip(prob, 0.0, 1.0)


def gamma_count_pmf(params, n):
    """P{N(t) = n} for the gamma count model."""
    if int(n) != n or n < 0:
        raise DomainError(f"count must be a non-negative integer, got {n}")
    return float(gamma_count_pmf_array(n, params.rate, params.alpha, params.exposure))


def gamma_count_moments(params, tail=1e-10, n_limit=100_000):
    """Mean and variance by summing the pmf until the remaining mass < ``tail``."""
    probs = []
    total = 0.0
    n = 0
    block = 64
    while 1.0 - total >= tail:
        ns = np.arange(n, n + block)
        chunk = gamma_count_pmf_array(ns, params.rate, params.alpha, params.exposure)
        probs.extend(chunk.tolist())
        total = math.fsum(probs)
        n += block
        if n > n_limit:
            raise ConvergenceError("gamma count pmf tail did not vanish", {"params": params})
    ns = np.arange(len(probs))
    p = np.asarray(probs)
    mean = math.fsum(ns * p)
    second = math.fsum(ns * ns * p)
    return mean, second - mean * mean
