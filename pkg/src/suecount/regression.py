"""Count regression with log links.

For observation j the rate is ``exp(beta_0 + sum_k beta_k x_jk)`` and, for the
two-parameter families, the shape is a single scalar ``exp(beta_{r+1})``
shared by all rows. The log-likelihood is the sum of log-probabilities of
the observed counts.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .baseline import GammaCountParams, gamma_count_moments, gamma_count_pmf_array, poisson_logpmf_array
from .distributions import SueParams, sue_dispersion, sue_logpmf_array
from .exceptions import (
    BoundedEvaluationError,
    ConvergenceError,
    DatasetError,
    DomainError,
    NumericalInstabilityError,
)
from .optimize import OptimizerSettings

FAMILIES = ("poisson", "gamma_count", "sue")
MAX_LINEAR_PREDICTOR = 700.0
# returned in place of log-likelihoods that cannot be evaluated
LOGLIK_SENTINEL = -math.inf

_NUMERIC_ERRORS = (
    BoundedEvaluationError,
    ConvergenceError,
    DomainError,
    NumericalInstabilityError,
    FloatingPointError,
    OverflowError,
)


@dataclass(frozen=True, eq=False)
class CountDataset:
    """Observed counts with their covariates.

    Parameters
    ----------
    responses : array_like of int, shape (m,)
    covariates : array_like of float, shape (m, r)
    covariate_names : sequence of str, length r
    exposure : float
        Shared observation window ``t``.
    """

    responses: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple
    exposure: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.responses)
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(len(y), 0)
        if y.ndim != 1:
            raise DatasetError("responses must be one-dimensional")
        if X.shape[0] != y.shape[0]:
            raise DatasetError(f"{X.shape[0]} covariate rows for {y.shape[0]} responses")
        if y.size == 0:
            raise DatasetError("dataset is empty")
        yf = y.astype(float)
        if not np.all(np.isfinite(yf)) or np.any(yf < 0) or np.any(yf != np.round(yf)):
            raise DatasetError("responses must be non-negative integers")
        if not np.all(np.isfinite(X)):
            raise DatasetError("covariates contain missing or non-finite values")
        names = tuple(str(c) for c in self.covariate_names)
        if len(names) != X.shape[1]:
            raise DatasetError(f"{len(names)} covariate names for {X.shape[1]} columns")
        if not (self.exposure > 0 and math.isfinite(self.exposure)):
            raise DatasetError("exposure must be positive")
        y = yf.astype(np.int64)
        y.flags.writeable = False
        X = X.copy()
        X.flags.writeable = False
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "exposure", float(self.exposure))

    def __eq__(self, other):
        if not isinstance(other, CountDataset):
            return NotImplemented
        return (
            self.covariate_names == other.covariate_names
            and self.exposure == other.exposure
            and np.array_equal(self.responses, other.responses)
            and np.array_equal(self.covariates, other.covariates)
        )

    @property
    def n_obs(self):
        return self.responses.shape[0]

    @property
    def n_covariates(self):
        return self.covariates.shape[1]

    def take(self, rows):
        """Subset (or reorder) observations."""
        return CountDataset(self.responses[rows], self.covariates[rows], self.covariate_names, self.exposure)


@dataclass(frozen=True)
class RegressionSpec:
    """Model family and fitting options.

    ``start`` overrides the warm start; ``start_from`` picks the warm start
    strategy (``"poisson"``: fitted Poisson coefficients with log-shape 0,
    ``"zero"``: all coefficients 0).
    """

    family: str = "sue"
    gamma_event: int = 1
    include_intercept: bool = True
    start: tuple = None
    start_from: str = "poisson"
    check_rank: bool = True
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family == "sue" and (int(self.gamma_event) != self.gamma_event or self.gamma_event < 1):
            raise ValueError("gamma_event must be an integer >= 1")
        if self.start_from not in ("poisson", "zero"):
            raise ValueError("start_from must be 'poisson' or 'zero'")

    @property
    def has_shape(self):
        return self.family != "poisson"

    def n_coef(self, dataset):
        return dataset.n_covariates + int(self.include_intercept) + int(self.has_shape)

    def coef_names(self, dataset):
        names = (["(Intercept)"] if self.include_intercept else []) + list(dataset.covariate_names)
        if self.has_shape:
            names.append("ln(alpha)")
        return names

    def label(self):
        if self.family == "sue":
            return f"SUE (gamma={self.gamma_event})"
        return {"poisson": "Poisson", "gamma_count": "Gamma"}[self.family]


def design_matrix(dataset, spec):
    X = dataset.covariates
    if spec.include_intercept:
        X = np.column_stack([np.ones(dataset.n_obs), X])
    return X


def _split(dataset, spec, beta):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (spec.n_coef(dataset),):
        raise ValueError(f"expected {spec.n_coef(dataset)} coefficients, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise BoundedEvaluationError("non-finite coefficient")
    if spec.has_shape:
        return beta[:-1], float(beta[-1])
    return beta, 0.0


def _rates(dataset, spec, beta):
    coef, log_alpha = _split(dataset, spec, beta)
    eta = design_matrix(dataset, spec) @ coef
    if np.max(eta) > MAX_LINEAR_PREDICTOR or abs(log_alpha) > MAX_LINEAR_PREDICTOR:
        raise BoundedEvaluationError("linear predictor exceeds the exponentiation bound")
    return np.exp(eta), math.exp(log_alpha)


def linear_predictor(dataset, beta, j, spec=None):
    """``(lambda_j, alpha_j)`` for row ``j``; ``alpha_j`` is 1 for Poisson."""
    spec = spec or RegressionSpec(family="sue" if len(beta) == dataset.n_covariates + 2 else "poisson")
    if not 0 <= j < dataset.n_obs:
        raise IndexError(f"row {j} out of range for {dataset.n_obs} observations")
    coef, log_alpha = _split(dataset, spec, beta)
    row = dataset.covariates[j]
    eta = (coef[0] if spec.include_intercept else 0.0) + float(row @ coef[int(spec.include_intercept):])
    if eta > MAX_LINEAR_PREDICTOR or abs(log_alpha) > MAX_LINEAR_PREDICTOR:
        raise BoundedEvaluationError(f"linear predictor {eta} exceeds the exponentiation bound")
    return math.exp(eta), math.exp(log_alpha)


def observation_logpmf(dataset, spec, beta, with_derivatives=False):
    """Per-observation log-probabilities (and log-link derivatives if asked)."""
    rates, alpha = _rates(dataset, spec, beta)
    n, t = dataset.responses, dataset.exposure
    with np.errstate(divide="ignore", over="raise", invalid="raise"):
        if spec.family == "poisson":
            logp = poisson_logpmf_array(n, rates, t)
            if with_derivatives:
                return logp, n - rates * t, None
            return logp
        if spec.family == "sue":
            return sue_logpmf_array(n, rates, alpha, spec.gamma_event, t, with_derivatives)
        if with_derivatives:
            raise NotImplementedError("analytic derivatives are not available for the gamma count model")
        return np.log(gamma_count_pmf_array(n, rates, alpha, t))


def log_likelihood(dataset, spec, beta):
    """Sum of log-probabilities of the observed counts.

    Returns ``-inf`` whenever any observation's probability underflows or a
    numeric guard trips, so line searches can back off.
    """
    try:
        logp = observation_logpmf(dataset, spec, beta)
    except _NUMERIC_ERRORS:
        return LOGLIK_SENTINEL
    if not np.all(np.isfinite(logp)):
        return LOGLIK_SENTINEL
    # np.sum uses a fixed pairwise reduction tree for a given length
    return float(np.sum(logp))


def has_analytic_gradient(spec):
    return spec.family in ("poisson", "sue")


def _fd_steps(beta, rel=1e-6, floor=1e-6):
    return np.maximum(floor, rel * np.abs(beta))


def log_likelihood_gradient(dataset, spec, beta, method="fd"):
    """Gradient of :func:`log_likelihood` with respect to the coefficients.

    Parameters
    ----------
    method : {"fd", "analytic"}
        ``"fd"`` (default) uses central differences with step
        ``max(1e-6, 1e-6 |beta_l|)``. ``"analytic"`` is available for the
        Poisson and SUE families.

    Raises
    ------
    NumericalInstabilityError
        If the log-likelihood is ``-inf`` at ``beta``.
    """
    beta = np.asarray(beta, dtype=float)
    if not math.isfinite(log_likelihood(dataset, spec, beta)):
        raise NumericalInstabilityError("gradient requested at a point with -inf log-likelihood")
    if method == "analytic":
        return _analytic_gradient(dataset, spec, beta)
    if method != "fd":
        raise ValueError(f"unknown gradient method {method!r}")
    steps = _fd_steps(beta)
    grad = np.empty_like(beta)
    for i, h in enumerate(steps):
        up, down = beta.copy(), beta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (log_likelihood(dataset, spec, up) - log_likelihood(dataset, spec, down)) / (2.0 * h)
    return grad


def _analytic_gradient(dataset, spec, beta):
    if not has_analytic_gradient(spec):
        raise NotImplementedError(f"no analytic gradient for family {spec.family!r}")
    _, d_rate, d_alpha = observation_logpmf(dataset, spec, beta, with_derivatives=True)
    grad = design_matrix(dataset, spec).T @ d_rate
    if spec.has_shape:
        grad = np.append(grad, np.sum(d_alpha))
    return grad


def objective(dataset, spec, gradient="auto"):
    """``fun_grad(beta) -> (-loglik, -grad)`` for the minimiser.

    ``gradient="auto"`` uses analytic derivatives where the family has them.
    """
    use_analytic = gradient == "analytic" or (gradient == "auto" and has_analytic_gradient(spec))

    def fun_grad(beta):
        ll = log_likelihood(dataset, spec, beta)
        if not math.isfinite(ll):
            return math.inf, np.full(len(beta), np.nan)
        try:
            if use_analytic:
                g = _analytic_gradient(dataset, spec, np.asarray(beta, dtype=float))
            else:
                g = log_likelihood_gradient(dataset, spec, beta, method="fd")
        except _NUMERIC_ERRORS:
            return math.inf, np.full(len(beta), np.nan)
        if not np.all(np.isfinite(g)):
            return math.inf, np.full(len(beta), np.nan)
        return -ll, -g

    return fun_grad


@dataclass(frozen=True)
class FittedMoments:
    mean: np.ndarray
    variance: np.ndarray
    errors: dict

    @property
    def vm_ratio(self):
        return self.variance / self.mean


def fitted_moments(dataset, spec, beta):
    """Per-observation model mean and variance.

    Closed forms for the SUE and Poisson families; pmf sums (tail < 1e-10)
    for the gamma count model. Failing rows get NaN and an entry in
    ``errors``.
    """
    rates, alpha = _rates(dataset, spec, beta)
    t = dataset.exposure
    m = dataset.n_obs
    if spec.family == "poisson":
        mu = rates * t
        return FittedMoments(mu.copy(), mu.copy(), {})
    mean = np.full(m, np.nan)
    var = np.full(m, np.nan)
    errors = {}
    cache = {}
    for j, lam in enumerate(rates):
        key = float(lam)
        if key not in cache:
            try:
                if spec.family == "sue":
                    summary = sue_dispersion(SueParams(key, alpha, spec.gamma_event, t))
                    cache[key] = (summary.mean, summary.variance)
                else:
                    cache[key] = gamma_count_moments(GammaCountParams(key, alpha, t))
            except _NUMERIC_ERRORS as exc:
                cache[key] = exc
        value = cache[key]
        if isinstance(value, Exception):
            errors[j] = str(value)
        else:
            mean[j], var[j] = value
    return FittedMoments(mean, var, errors)


def predicted_relative_frequencies(dataset, spec, beta, n_max):
    """Model-implied relative frequency of each count 0..n_max.

    Averages each row's pmf evaluated at its own covariates.
    """
    rates, alpha = _rates(dataset, spec, beta)
    t = dataset.exposure
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        ns = np.full(dataset.n_obs, n)
        if spec.family == "poisson":
            p = np.exp(poisson_logpmf_array(ns, rates, t))
        elif spec.family == "sue":
            p = np.exp(sue_logpmf_array(ns, rates, alpha, spec.gamma_event, t))
        else:
            p = gamma_count_pmf_array(ns, rates, alpha, t)
        out[n] = np.mean(p)
    return out


def sample_relative_frequencies(dataset, n_max):
    counts = np.bincount(dataset.responses, minlength=n_max + 1)[: n_max + 1]
    return counts / dataset.n_obs
