"""scikit-learn style wrappers around :func:`suecount.inference.fit`."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .inference import fit
from .optimize import OptimizerSettings
from .regression import CountDataset, RegressionSpec, fitted_moments, log_likelihood, observation_logpmf


def _check_counts(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise ValueError("y must contain non-negative integer counts")
    return y.astype(np.int64)


class _CountRegressor(RegressorMixin, BaseEstimator):
    family = None

    def _spec(self):
        return RegressionSpec(
            family=self.family,
            gamma_event=getattr(self, "gamma_event", 1),
            include_intercept=self.fit_intercept,
            start_from=self.start_from,
            optimizer=OptimizerSettings(max_iters=self.max_iter, grad_tol=self.tol),
        )

    def _dataset(self, X, y=None):
        X = check_array(X, ensure_min_features=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        y = np.zeros(X.shape[0], dtype=np.int64) if y is None else _check_counts(y)
        return CountDataset(y, X, self._names, self.exposure)

    def fit(self, X, y):
        """Fit by maximum likelihood.

        Parameters
        ----------
        X : array_like, shape (m, r)
        y : array_like of non-negative int, shape (m,)

        Returns
        -------
        self
        """
        X, y = check_X_y(X, y, y_numeric=True, ensure_min_features=0)
        y = _check_counts(y)
        self.n_features_in_ = X.shape[1]
        names = getattr(self, "feature_names_in_", None)
        self._names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(X.shape[1]))
        self.spec_ = self._spec()
        self.result_ = fit(CountDataset(y, X, self._names, self.exposure), self.spec_)
        beta = self.result_.beta_hat
        k = int(self.fit_intercept)
        self.intercept_ = float(beta[0]) if self.fit_intercept else 0.0
        self.coef_ = beta[k : k + X.shape[1]].copy()
        self.alpha_ = float(np.exp(self.result_.log_alpha))
        self.loglik_ = self.result_.loglik
        self.bse_ = self.result_.std_errors.copy()
        self.converged_ = self.result_.converged
        return self

    def predict(self, X):
        """Model mean count for each row."""
        check_is_fitted(self, "result_")
        ds = self._dataset(X)
        return fitted_moments(ds, self.spec_, self.result_.beta_hat).mean

    def predict_variance(self, X):
        """Model variance of the count for each row."""
        check_is_fitted(self, "result_")
        ds = self._dataset(X)
        return fitted_moments(ds, self.spec_, self.result_.beta_hat).variance

    def predict_pmf(self, X, n_max):
        """Probabilities of counts ``0..n_max`` for each row, shape (m, n_max + 1)."""
        check_is_fitted(self, "result_")
        ds = self._dataset(X)
        out = np.empty((ds.n_obs, n_max + 1))
        for n in range(n_max + 1):
            shifted = CountDataset(np.full(ds.n_obs, n), ds.covariates, ds.covariate_names, ds.exposure)
            out[:, n] = np.exp(observation_logpmf(shifted, self.spec_, self.result_.beta_hat))
        return out

    def score(self, X, y, sample_weight=None):
        """Average log-likelihood per observation (higher is better)."""
        check_is_fitted(self, "result_")
        ds = self._dataset(X, y)
        if sample_weight is None:
            return log_likelihood(ds, self.spec_, self.result_.beta_hat) / ds.n_obs
        lp = observation_logpmf(ds, self.spec_, self.result_.beta_hat)
        w = np.asarray(sample_weight, dtype=float)
        return float(np.dot(w, lp) / w.sum())


class PoissonCountRegressor(_CountRegressor):
    """Poisson regression with a log link."""

    family = "poisson"

    def __init__(self, fit_intercept=True, start_from="poisson", max_iter=500, tol=1e-6, exposure=1.0):
        self.fit_intercept = fit_intercept
        self.start_from = start_from
        self.max_iter = max_iter
        self.tol = tol
        self.exposure = exposure


class GammaCountRegressor(_CountRegressor):
    """Gamma count regression; ``alpha_`` is the fitted interarrival shape."""

    family = "gamma_count"

    def __init__(self, fit_intercept=True, start_from="poisson", max_iter=500, tol=1e-6, exposure=1.0):
        self.fit_intercept = fit_intercept
        self.start_from = start_from
        self.max_iter = max_iter
        self.tol = tol
        self.exposure = exposure


class SUERegressor(_CountRegressor):
    """Single-unusual-event count regression.

    Parameters
    ----------
    gamma_event : int
        Index of the event whose interarrival rate is ``alpha * rate``.
    fit_intercept : bool
    start_from : {"poisson", "zero"}
        Warm start from the fitted Poisson coefficients, or start at zero.
    max_iter : int
    tol : float
        Max-norm gradient tolerance.
    exposure : float
        Observation window shared by all rows.

    Attributes
    ----------
    coef_, intercept_ : fitted rate coefficients
    alpha_ : fitted rate multiplier of the unusual event
    loglik_ : maximised log-likelihood
    bse_ : standard errors, including the log-shape as the last entry
    result_ : :class:`~suecount.inference.FitResult`
    """

    family = "sue"

    def __init__(self, gamma_event=1, fit_intercept=True, start_from="poisson", max_iter=500, tol=1e-6, exposure=1.0):
        self.gamma_event = gamma_event
        self.fit_intercept = fit_intercept
        self.start_from = start_from
        self.max_iter = max_iter
        self.tol = tol
        self.exposure = exposure
