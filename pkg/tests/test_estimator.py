import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from suecount.estimator import GammaCountRegressor, PoissonCountRegressor, SUERegressor
from suecount.inference import fit
from suecount.regression import RegressionSpec


def test_params_and_clone():
    est = SUERegressor(gamma_event=3, tol=1e-7)
    assert est.get_params()["gamma_event"] == 3
    assert clone(est).get_params() == est.get_params()
    assert est.set_params(gamma_event=2).gamma_event == 2


def test_not_fitted():
    with pytest.raises(NotFittedError):
        SUERegressor().predict(np.zeros((2, 1)))


def test_matches_functional_fit(toy):
    est = SUERegressor(gamma_event=2).fit(toy.covariates, toy.responses)
    ref = fit(toy, RegressionSpec("sue", 2))
    assert est.loglik_ == ref.loglik
    assert est.intercept_ == ref.beta_hat[0]
    np.testing.assert_array_equal(est.coef_, ref.beta_hat[1:3])
    assert est.alpha_ == pytest.approx(np.exp(ref.beta_hat[-1]))
    np.testing.assert_allclose(est.predict(toy.covariates), ref.fitted["mean"])
    np.testing.assert_allclose(est.predict_variance(toy.covariates), ref.fitted["variance"])
    assert est.score(toy.covariates, toy.responses) == pytest.approx(ref.loglik / toy.n_obs)


@pytest.mark.parametrize("cls", [PoissonCountRegressor, GammaCountRegressor, SUERegressor])
def test_pmf_rows_sum_to_one(toy, cls):
    est = cls().fit(toy.covariates, toy.responses)
    pmf = est.predict_pmf(toy.covariates[:5], 40)
    assert pmf.shape == (5, 41)
    np.testing.assert_allclose(pmf.sum(axis=1), 1.0, atol=1e-9)


def test_input_validation(toy):
    with pytest.raises(ValueError):
        SUERegressor().fit(toy.covariates, -toy.responses - 1)
    with pytest.raises(ValueError):
        SUERegressor().fit(toy.covariates[:, :1] * np.nan, toy.responses)
    est = PoissonCountRegressor().fit(toy.covariates, toy.responses)
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 5)))


def test_no_intercept(toy):
    est = PoissonCountRegressor(fit_intercept=False).fit(toy.covariates, toy.responses)
    assert est.intercept_ == 0.0 and est.coef_.shape == (2,)
