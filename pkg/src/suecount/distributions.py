"""Single-unusual-event (SUE) count distribution.

Interarrival times are independent exponentials with rate ``alpha * rate`` for
event ``gamma_event`` and ``rate`` for every other event. The count
``N(t)`` over an exposure window ``t`` then has

    P{N = n} = Poisson(n; rate*t)                         n <  gamma - 1
             = (rate*t)^n e^{-rate*t} S_n(x)               n == gamma - 1
             = alpha (rate*t)^n e^{-rate*t} S_n(x)         n >  gamma - 1

with ``x = (1 - alpha) rate t`` and ``S_n(x) = sum_i x^i / (i + n)!``.

``S_n`` has two evaluation routes. The closed ("direct") form writes it as
``(e^x - sum_{i<n} x^i/i!) / x^n``, which is 0/0 at ``alpha == 1`` and loses
digits when the subtraction cancels. The series form sums ``S_n`` term by
term; for ``x < 0`` the alternating series is rearranged with Kummer's
transformation ``S_n(x) = e^x / n! * sum_i n/(n+i) |x|^i / i!`` so that all
summed terms are positive. :func:`sue_pmf` dispatches between the two.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .exceptions import ConvergenceError, DomainError, NumericalInstabilityError
from .special import log_regularized_lower_incomplete_gamma

SERIES_SWITCH = 30.0
NEAR_ONE = 1e-4
SERIES_REL_TOL = 1e-16
SERIES_PATIENCE = 3
SERIES_MAX_TERMS = 10_000
PROB_SLACK = 1e-9
CLAMP_NEGATIVE = 1e-12
EQUI_BAND = 1e-10
# largest tolerated (condition number * machine eps) in the direct subtraction
DIRECT_MAX_REL_ERROR = 1e-11

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SueParams:
    """Parameters of one SUE distribution.

    Parameters
    ----------
    rate : float
        Usual event rate per unit time (lambda), > 0.
    alpha : float
        Multiplier on the rate of the unusual interarrival, > 0.
    gamma_event : int
        Index (1-based) of the unusual event.
    exposure : float
        Observation window length ``t``, > 0.
    """

    rate: float
    alpha: float
    gamma_event: int = 1
    exposure: float = 1.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise DomainError(f"rate must be positive and finite, got {self.rate}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.exposure > 0 and math.isfinite(self.exposure)):
            raise DomainError(f"exposure must be positive and finite, got {self.exposure}")
        if int(self.gamma_event) != self.gamma_event or self.gamma_event < 1:
            raise DomainError(f"gamma_event must be an integer >= 1, got {self.gamma_event}")

    @property
    def mu(self):
        """Usual-rate expected count ``rate * exposure``."""
        return self.rate * self.exposure

    @property
    def x(self):
        """Series argument ``(1 - alpha) * rate * exposure``."""
        return (1.0 - self.alpha) * self.rate * self.exposure

    def interarrival_rate(self, k):
        """Rate of the k-th interarrival time (1-based)."""
        return self.alpha * self.rate if k == self.gamma_event else self.rate


@dataclass(frozen=True)
class PmfTable:
    params: SueParams
    probs: tuple
    tail_mass: float
    form_used: tuple
    terms_used: tuple

    @property
    def n_max(self):
        return len(self.probs) - 1


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    second_moment: float
    variance: float
    vm_ratio: float
    classification: str = field(default="")


def _check_count(n):
    if int(n) != n or n < 0:
        raise DomainError(f"count must be a non-negative integer, got {n}")
    return int(n)


def _log_poisson(n, mu):
    return n * math.log(mu) - mu - math.lgamma(n + 1)


def _log_s_series(n, x):
    """log S_n(x) by positive-term summation; returns (value, terms used)."""
    if x == 0.0:
        return -math.lgamma(n + 1), 1
    if x > 0:
        log_x = math.log(x)
        log_term = 0.0

        def step(i, lt):
            return lt + log_x - math.log(n + i + 1)

        offset = -math.lgamma(n + 1)
    else:
        if n == 0:
            return x, 1
        log_y = math.log(-x)
        log_term = 0.0

        def step(i, lt):
            return lt + math.log((n + i) / (n + i + 1)) + log_y - math.log(i + 1)

        offset = x - math.lgamma(n + 1)

    # online log-sum-exp: total = exp(peak) * scaled
    peak, scaled = log_term, 1.0
    log_tol = math.log(SERIES_REL_TOL)
    quiet = 0
    for i in range(SERIES_MAX_TERMS):
        log_term = step(i, log_term)
        if log_term > peak:
            scaled = scaled * math.exp(peak - log_term) + 1.0
            peak = log_term
        else:
            scaled += math.exp(log_term - peak)
        if log_term < peak + math.log(scaled) + log_tol:
            quiet += 1
            if quiet >= SERIES_PATIENCE:
                return offset + peak + math.log(scaled), i + 2
        else:
            quiet = 0
    raise ConvergenceError(
        f"SUE series did not converge within {SERIES_MAX_TERMS} terms",
        {"n": n, "x": x},
    )


def _log_s_direct(n, x):
    """log S_n(x) from the closed form (e^x - sum_{i<n} x^i/i!) / x^n."""
    if x == 0.0:
        raise DomainError("direct form is indeterminate (0/0) at alpha == 1")
    if n == 0:
        return x
    if x > 0:
        # e^x - sum_{i<n} x^i/i! == e^x P(n, x)
        return x + log_regularized_lower_incomplete_gamma(n, x) - n * math.log(x)

    partial = 0.0
    magnitude = 0.0
    term = 1.0
    for i in range(n):
        if i:
            term *= x / i
        partial += term
        magnitude += abs(term)
    e_x = math.exp(x)
    bracket = e_x - partial
    magnitude += e_x
    if not math.isfinite(bracket) or bracket == 0.0:
        raise NumericalInstabilityError(f"direct form overflowed or cancelled fully (n={n}, x={x})")
    if magnitude / abs(bracket) * _EPS * (n + 1) > DIRECT_MAX_REL_ERROR:
        raise NumericalInstabilityError(
            f"catastrophic cancellation in direct form (n={n}, x={x}, "
            f"condition={magnitude / abs(bracket):.3g})"
        )
    # S_n(x) > 0, so bracket and x^n share a sign
    if (bracket < 0) != (n % 2 == 1):
        raise NumericalInstabilityError(f"direct form returned the wrong sign (n={n}, x={x})")
    return math.log(abs(bracket)) - n * math.log(-x)


def _finish(log_p, params, n):
    p = math.exp(log_p) if log_p > -745.2 else 0.0
    if not (-PROB_SLACK <= p <= 1.0 + PROB_SLACK) or math.isnan(p):
        raise NumericalInstabilityError(
            f"probability {p} outside [0, 1] for n={n}, params={params}"
        )
    if p < 0:
        if p < -CLAMP_NEGATIVE:
            raise NumericalInstabilityError(f"negative probability {p} for n={n}")
        p = 0.0
    return min(p, 1.0)


def _log_pmf_from_s(params, n, log_s):
    log_p = n * math.log(params.mu) - params.mu + log_s
    if n > params.gamma_event - 1:
        log_p += math.log(params.alpha)
    return log_p


def sue_pmf_direct(params, n):
    """P{N(t) = n} from the closed form.

    Large factors are combined in log space. Raises :class:`DomainError` at
    ``alpha == 1`` and :class:`NumericalInstabilityError` when the internal
    subtraction is too ill-conditioned to trust.
    """
    n = _check_count(n)
    if params.alpha == 1.0:
        raise DomainError("direct form is indeterminate (0/0) at alpha == 1")
    if n < params.gamma_event - 1:
        return _finish(_log_poisson(n, params.mu), params, n)
    return _finish(_log_pmf_from_s(params, n, _log_s_direct(n, params.x)), params, n)


def sue_pmf_series(params, n):
    """P{N(t) = n} from the series form.

    Returns
    -------
    (float, int)
        The probability and the number of series terms summed (0 on the
        Poisson branch ``n < gamma_event - 1``).
    """
    n = _check_count(n)
    if n < params.gamma_event - 1:
        return _finish(_log_poisson(n, params.mu), params, n), 0
    log_s, terms = _log_s_series(n, params.x)
    return _finish(_log_pmf_from_s(params, n, log_s), params, n), terms


def _prefers_series(params):
    return abs(params.x) <= SERIES_SWITCH or abs(1.0 - params.alpha) <= NEAR_ONE


def _log_s(n, x, series_first):
    """log S_n(x) via the preferred route, falling back to the other one."""
    routes = ("series", "direct") if series_first else ("direct", "series")
    first_error = None
    for route in routes:
        try:
            if route == "series":
                value, terms = _log_s_series(n, x)
            else:
                value, terms = _log_s_direct(n, x), 0
            return value, route, terms
        except (DomainError, NumericalInstabilityError, ConvergenceError) as exc:
            first_error = first_error or exc
    raise first_error


def _evaluate(params, n):
    n = _check_count(n)
    series_first = _prefers_series(params)
    if n < params.gamma_event - 1:
        form = "series" if series_first else "direct"
        return _finish(_log_poisson(n, params.mu), params, n), form, 0
    log_s, form, terms = _log_s(n, params.x, series_first)
    return _finish(_log_pmf_from_s(params, n, log_s), params, n), form, terms


def sue_pmf(params, n):
    """P{N(t) = n}, choosing the numerically safe form.

    The series is used when ``|1 - alpha| rate t <= 30`` or
    ``|1 - alpha| <= 1e-4``; otherwise the closed form in log space. If the
    preferred route fails the other one is tried before giving up.
    """
    return _evaluate(params, n)[0]


def sue_logpmf(params, n):
    """log P{N(t) = n}; ``-inf`` when the probability underflows."""
    n = _check_count(n)
    if n < params.gamma_event - 1:
        return _log_poisson(n, params.mu)
    log_s, _, _ = _log_s(n, params.x, _prefers_series(params))
    return _log_pmf_from_s(params, n, log_s)


def sue_pmf_table(params, n_max):
    """Tabulate ``sue_pmf`` for n = 0..n_max."""
    n_max = _check_count(n_max)
    probs, forms, terms = [], [], []
    for n in range(n_max + 1):
        try:
            p, form, used = _evaluate(params, n)
        except (DomainError, NumericalInstabilityError, ConvergenceError) as exc:
            exc.args = (f"{exc.args[0] if exc.args else exc} [at n={n}]",) + exc.args[1:]
            exc.n = n
            raise
        probs.append(p)
        forms.append(form)
        terms.append(used)
    tail = 1.0 - math.fsum(probs)
    if -CLAMP_NEGATIVE <= tail < 0:
        tail = 0.0
    return PmfTable(params, tuple(probs), tail, tuple(forms), tuple(terms))


# --------------------------------------------------------------------------
# moments


def _gamma_one_moments(params):
    a, mu = params.alpha, params.mu
    decay = -math.expm1(-a * mu)  # 1 - e^{-alpha mu}
    mean = mu + (a - 1.0) / a * decay
    second = (3.0 * a - 2.0) / a * mu + mu * mu + (a - 2.0) * (a - 1.0) / (a * a) * decay
    return mean, second


def _raw_moments(params):
    mean, second = _gamma_one_moments(params)
    g = params.gamma_event
    if g == 1:
        return mean, second
    # the pmf for n >= gamma agrees with the gamma == 1 case; correct the head
    base = SueParams(params.rate, params.alpha, 1, params.exposure)
    head_mean, head_second = [], []
    for n in range(1, g - 1):
        diff = math.exp(_log_poisson(n, params.mu)) - sue_pmf(base, n)
        head_mean.append(n * diff)
        head_second.append(n * n * diff)
    q_last = sue_pmf(base, g - 1)
    shift = (1.0 - params.alpha) / params.alpha * q_last
    head_mean.append((g - 1) * shift)
    head_second.append((g - 1) ** 2 * shift)
    return mean + math.fsum(head_mean), second + math.fsum(head_second)


def sue_mean(params):
    """E{N(t)} from the closed-form moment expressions."""
    return _raw_moments(params)[0]


def sue_second_moment(params):
    """E{N(t)^2} from the closed-form moment expressions."""
    return _raw_moments(params)[1]


def classify_dispersion(mean, variance, band=EQUI_BAND):
    diff = variance - mean
    if abs(diff) <= band:
        return "equi"
    return "over" if diff > 0 else "under"


def sue_dispersion(params):
    """Moments plus an over/under/equi classification of ``variance - mean``."""
    mean, second = _raw_moments(params)
    variance = second - mean * mean
    if -1e-10 * max(second, 1.0) <= variance < 0:
        variance = 0.0
    return MomentSummary(
        mean=mean,
        second_moment=second,
        variance=variance,
        vm_ratio=variance / mean,
        classification=classify_dispersion(mean, variance),
    )


def variance_minus_mean_gamma_one(params):
    """Closed form of V - E for ``gamma_event == 1``."""
    a, mu = params.alpha, params.mu
    z = a * mu
    # e^{-z}(a(cosh z - 1) + sinh z - z), with the exponentials folded in
    body = a * 0.5 * (1.0 - math.exp(-z)) ** 2 + 0.5 * (-math.expm1(-2.0 * z)) - z * math.exp(-z)
    return 2.0 * (1.0 - a) / (a * a) * body


@dataclass(frozen=True)
class VmSurface:
    gamma_event: int
    rates: tuple
    alphas: tuple
    exposure: float
    ratio: np.ndarray  # shape (len(rates), len(alphas)); NaN where evaluation failed
    errors: dict

    def rows(self):
        """Long-format ``(rate, alpha, vm_ratio)`` rows."""
        for i, lam in enumerate(self.rates):
            for j, a in enumerate(self.alphas):
                yield lam, a, float(self.ratio[i, j])


def vm_surface(gamma_event, lambda_grid, alpha_grid, t=1.0):
    """Variance/mean ratio of the SUE distribution on a (rate, alpha) grid.

    Per-cell failures are recorded in ``errors`` keyed by grid index and
    leave NaN in the ratio array.
    """
    rates = tuple(float(v) for v in lambda_grid)
    alphas = tuple(float(v) for v in alpha_grid)
    if not all(math.isfinite(v) and v > 0 for v in rates + alphas + (t,)):
        raise DomainError("grids and exposure must be finite and positive")
    ratio = np.full((len(rates), len(alphas)), np.nan)
    errors = {}
    for i, lam in enumerate(rates):
        for j, a in enumerate(alphas):
            try:
                ratio[i, j] = sue_dispersion(SueParams(lam, a, gamma_event, t)).vm_ratio
            except (DomainError, NumericalInstabilityError, ConvergenceError) as exc:
                errors[(i, j)] = str(exc)
    return VmSurface(int(gamma_event), rates, alphas, float(t), ratio, errors)


# --------------------------------------------------------------------------
# vectorised evaluation for the likelihood hot path


def _series_scaled_vec(n, x):
    """T_n(x) = n! S_n(x) for arrays with |x| <= SERIES_SWITCH.

    Same positive-term summation and stopping rule as the scalar series.
    """
    n = n.astype(float)
    pos = x >= 0
    y = np.abs(x)
    total = np.ones_like(x)
    term = np.ones_like(x)
    quiet = np.zeros(x.shape, dtype=int)
    active = ~((x == 0) | (~pos & (n == 0)))
    for i in range(SERIES_MAX_TERMS):
        if not active.any():
            break
        ratio = np.where(pos, x / (n + i + 1), (n + i) / (n + i + 1) * y / (i + 1))
        term = np.where(active, term * ratio, 0.0)
        total = total + term
        small = term < SERIES_REL_TOL * total
        quiet = np.where(small, quiet + 1, 0)
        active &= quiet < SERIES_PATIENCE
    else:
        raise ConvergenceError("vectorised SUE series did not converge", {})
    log_t = np.log(total)
    # Kummer form carries e^x; n == 0 with x < 0 is exactly e^x
    return np.where(pos, log_t, x + np.where(n == 0, 0.0, log_t))


def _log_s_vec(n, x, series_ok):
    """log S_n(x) element-wise; scalar dispatcher for the far regime."""
    out = np.empty(x.shape)
    if series_ok.any():
        out[series_ok] = _series_scaled_vec(n[series_ok], x[series_ok]) - gammaln(n[series_ok] + 1.0)
    for idx in np.flatnonzero(~series_ok):
        out[idx] = _log_s(int(n[idx]), float(x[idx]), series_first=False)[0]
    return out


def sue_logpmf_array(n, rate, alpha, gamma_event, exposure=1.0, with_derivatives=False):
    """Element-wise log-pmf for arrays of counts and parameters.

    Parameters
    ----------
    n : array_like of int
    rate, alpha : array_like of float
        Broadcast against ``n``.
    gamma_event : int
    exposure : float
    with_derivatives : bool
        Also return derivatives of the log-pmf with respect to ``log(rate)``
        and ``log(alpha)``.

    Returns
    -------
    ndarray or (ndarray, ndarray, ndarray)
    """
    n, rate, alpha = np.broadcast_arrays(
        np.asarray(n, dtype=float), np.asarray(rate, dtype=float), np.asarray(alpha, dtype=float)
    )
    n = n.ravel()
    mu = rate.ravel() * exposure
    alpha = alpha.ravel()
    x = (1.0 - alpha) * mu
    g = int(gamma_event)

    log_p = n * np.log(mu) - mu - gammaln(n + 1.0)
    poisson_branch = n < g - 1
    rest = ~poisson_branch
    series_ok = (np.abs(x) <= SERIES_SWITCH) | (np.abs(1.0 - alpha) <= NEAR_ONE)

    d_rate = n - mu
    d_alpha = np.zeros_like(n)
    if rest.any():
        nr, xr, okr = n[rest], x[rest], series_ok[rest]
        log_s = _log_s_vec(nr, xr, okr)
        with_alpha = nr > g - 1
        log_p[rest] = (
            nr * np.log(mu[rest]) - mu[rest] + log_s + np.where(with_alpha, np.log(alpha[rest]), 0.0)
        )
        if with_derivatives:
            # dS_n/dx = S_n - n S_{n+1}
            dlog_s = 1.0 - nr * np.exp(_log_s_vec(nr + 1.0, xr, okr) - log_s)
            d_rate[rest] = nr - mu[rest] + xr * dlog_s
            d_alpha[rest] = with_alpha.astype(float) - alpha[rest] * mu[rest] * dlog_s
    if with_derivatives:
        return log_p, d_rate, d_alpha
    return log_p
