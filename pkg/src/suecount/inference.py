"""Maximum-likelihood fitting, standard errors and gamma-event selection."""

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .exceptions import RankDeficientError, SueError
from .optimize import minimize_bfgs, steepest_descent
from .regression import (
    RegressionSpec,
    design_matrix,
    fitted_moments,
    log_likelihood,
    objective,
)

RANK_TOL = 1e-10


def num_threads():
    """Worker count from ``SUE_NUM_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("SUE_NUM_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``fitted`` holds per-observation arrays ``rate``, ``alpha``, ``mean`` and
    ``variance``. ``history`` is the log-likelihood after every accepted
    iteration of the final optimisation run.
    """

    spec: RegressionSpec
    coef_names: list
    beta_hat: np.ndarray
    loglik: float
    std_errors: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    start_used: np.ndarray
    fitted: dict
    history: list = field(default_factory=list)
    message: str = ""
    elapsed: float = 0.0
    poisson_loglik: float = math.nan

    @property
    def n_coef(self):
        return self.beta_hat.size

    @property
    def aic(self):
        return 2.0 * self.n_coef - 2.0 * self.loglik

    @property
    def log_alpha(self):
        return float(self.beta_hat[-1]) if self.spec.has_shape else 0.0


def check_full_rank(dataset, spec, tol=RANK_TOL):
    """Raise :class:`RankDeficientError` naming dependent design columns."""
    X = design_matrix(dataset, spec)
    names = spec.coef_names(dataset)[: X.shape[1]]
    if X.shape[1] == 0:
        return
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] > tol * s[0]:
        return
    _, r, perm = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * diag[0]))
    dependent = [names[i] for i in perm[rank:]]
    raise RankDeficientError(
        f"design matrix is rank deficient (rank {rank} < {X.shape[1]}); dependent columns: {dependent}",
        dependent,
    )


def numerical_hessian(fun, beta, rel=1e-4, floor=1e-4):
    """Central-difference Hessian of a scalar function."""
    beta = np.asarray(beta, dtype=float)
    k = beta.size
    h = np.maximum(floor, rel * np.abs(beta))
    hess = np.empty((k, k))
    f0 = fun(beta)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        hess[i, i] = (fun(beta + ei) - 2.0 * f0 + fun(beta - ei)) / (h[i] * h[i])
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            val = (
                fun(beta + ei + ej) - fun(beta + ei - ej) - fun(beta - ei + ej) + fun(beta - ei - ej)
            ) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return 0.5 * (hess + hess.T)


def observed_information(dataset, spec, beta_hat):
    return -numerical_hessian(lambda b: log_likelihood(dataset, spec, b), beta_hat)


def standard_errors(dataset, spec, beta_hat):
    """Square roots of the diagonal of the inverse observed information.

    Coordinates whose variance cannot be estimated are returned as NaN and
    a ``RuntimeWarning`` names the smallest eigenvalue of the information.
    """
    info = observed_information(dataset, spec, beta_hat)
    if not np.all(np.isfinite(info)):
        warnings.warn("observed information is not finite; standard errors unavailable", RuntimeWarning)
        return np.full(len(beta_hat), np.nan)
    eigvals = np.linalg.eigvalsh(info)
    if eigvals[0] <= 0:
        warnings.warn(
            f"observed information is not positive definite (smallest eigenvalue {eigvals[0]:.6g})",
            RuntimeWarning,
        )
        cov = np.linalg.pinv(info)
    else:
        cov = np.linalg.inv(info)
    diag = np.diag(cov)
    with np.errstate(invalid="ignore"):
        return np.where(diag > 0, np.sqrt(np.where(diag > 0, diag, 0.0)), np.nan)


def _run(dataset, spec, start, descent_first=0):
    fun_grad = objective(dataset, spec)
    history = []
    x0 = np.asarray(start, dtype=float)
    if descent_first:
        pre = steepest_descent(fun_grad, x0, descent_first, spec.optimizer, history=history)
        x0 = pre.x
        history.pop()  # BFGS re-records its starting value
    res = minimize_bfgs(fun_grad, x0, spec.optimizer, history=history)
    return res, [-v for v in history]


def _poisson_start(dataset, spec):
    beta = np.zeros(dataset.n_covariates + int(spec.include_intercept))
    if spec.include_intercept and spec.start_from == "poisson":
        beta[0] = math.log(float(np.mean(dataset.responses)) + 1e-8)
    return beta


def fit(dataset, spec=None):
    """Fit a count regression by maximum likelihood.

    Two stages: a Poisson fit (start ``beta_0 = ln(mean + 1e-8)``, other
    coefficients 0), then for two-parameter families a BFGS run started from
    the Poisson solution with log-shape 0. If that run fails to converge, one
    restart from zero (steepest descent, then BFGS) is attempted and the
    better of the two is reported. Non-convergence is reported through
    ``converged=False``, never raised.
    """
    spec = spec or RegressionSpec()
    started = time.perf_counter()
    if spec.check_rank:
        check_full_rank(dataset, spec)
    k = spec.n_coef(dataset)

    poisson_spec = replace(spec, family="poisson", start=None)
    if spec.family == "poisson" and spec.start is not None:
        p_start = np.asarray(spec.start, dtype=float)
    else:
        p_start = _poisson_start(dataset, spec)
    p_res, p_hist = _run(dataset, poisson_spec, p_start)
    poisson_ll = -p_res.fun

    if spec.family == "poisson":
        res, hist, start = p_res, p_hist, p_start
    else:
        if spec.start is not None:
            start = np.asarray(spec.start, dtype=float)
        elif spec.start_from == "zero":
            start = np.zeros(k)
        else:
            start = np.append(p_res.x, 0.0)
        res, hist = _run(dataset, spec, start)
        if not res.converged:
            alt, alt_hist = _run(dataset, spec, np.zeros(k), spec.optimizer.fallback_descent_iters)
            if alt.fun < res.fun or (alt.converged and alt.fun <= res.fun + 1e-9):
                res, hist, start = alt, alt_hist, np.zeros(k)

    if start.shape != (k,):
        raise ValueError(f"start vector must have {k} entries")
    beta = np.asarray(res.x, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        se = standard_errors(dataset, spec, beta)
    rates = np.exp(design_matrix(dataset, spec) @ (beta[:-1] if spec.has_shape else beta))
    alpha = math.exp(beta[-1]) if spec.has_shape else 1.0
    moments = fitted_moments(dataset, spec, beta)
    fitted = {
        "rate": rates,
        "alpha": np.full(dataset.n_obs, alpha),
        "mean": moments.mean,
        "variance": moments.variance,
    }
    return FitResult(
        spec=spec,
        coef_names=spec.coef_names(dataset),
        beta_hat=beta,
        loglik=-res.fun,
        std_errors=se,
        converged=bool(res.converged),
        iterations=res.iterations,
        gradient_norm=res.gradient_norm,
        start_used=np.asarray(start, dtype=float),
        fitted=fitted,
        history=hist,
        message=res.message,
        elapsed=time.perf_counter() - started,
        poisson_loglik=poisson_ll,
    )


@dataclass(frozen=True)
class ScanRow:
    gamma_event: int
    loglik: float
    aic: float
    converged: bool
    error: str = ""


@dataclass(frozen=True)
class GammaScan:
    rows: tuple
    best_gamma: int

    @property
    def best(self):
        return next(r for r in self.rows if r.gamma_event == self.best_gamma)


def scan_gamma(dataset, spec_base=None, gamma_range=range(1, 7)):
    """Fit the SUE model for each unusual-event index and pick the best.

    The argmax of the log-likelihood wins; ties go to the smaller index.
    A failed fit is recorded on its row and the scan continues.
    """
    spec_base = spec_base or RegressionSpec(family="sue")
    gammas = sorted({int(g) for g in gamma_range})
    if not gammas or gammas[0] < 1:
        raise ValueError("gamma_range must be non-empty with every value >= 1")

    def one(g):
        try:
            res = fit(dataset, replace(spec_base, family="sue", gamma_event=g))
            return ScanRow(g, res.loglik, res.aic, res.converged)
        except (SueError, ArithmeticError, ValueError) as exc:
            return ScanRow(g, -math.inf, math.inf, False, str(exc))

    workers = min(num_threads(), len(gammas))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(one, gammas))
    else:
        rows = tuple(one(g) for g in gammas)
    best = max(rows, key=lambda r: (r.loglik, -r.gamma_event))
    return GammaScan(rows, best.gamma_event)
