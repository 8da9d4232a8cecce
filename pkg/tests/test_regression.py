import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from suecount.exceptions import BoundedEvaluationError, DatasetError, NumericalInstabilityError
from suecount.inference import fit
from suecount.regression import (
    CountDataset,
    RegressionSpec,
    fitted_moments,
    linear_predictor,
    log_likelihood,
    log_likelihood_gradient,
    predicted_relative_frequencies,
    sample_relative_frequencies,
)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        CountDataset([], np.zeros((0, 1)), ("a",))
    with pytest.raises(DatasetError):
        CountDataset([1, -1], np.zeros((2, 1)), ("a",))
    with pytest.raises(DatasetError):
        CountDataset([1, 2], np.array([[1.0], [np.nan]]), ("a",))
    with pytest.raises(DatasetError):
        CountDataset([1, 2], np.zeros((3, 1)), ("a",))
    with pytest.raises(DatasetError):
        CountDataset([1.5, 2], np.zeros((2, 1)), ("a",))
    ds = CountDataset([1, 2], np.zeros((2, 1)), ("a",))
    with pytest.raises(ValueError):
        ds.responses[0] = 3


def test_linear_predictor():
    ds = CountDataset([0, 1], np.array([[1.0], [2.0]]), ("x",))
    lam, a = linear_predictor(ds, np.array([0.1, 0.2, math.log(3)]), 1)
    assert lam == pytest.approx(math.exp(0.5)) and a == pytest.approx(3.0)
    with pytest.raises(BoundedEvaluationError):
        linear_predictor(ds, np.array([800.0, 0.0, 0.0]), 0)


@pytest.mark.parametrize("g", range(1, 7))
def test_family_nesting(toy, g):
    beta = np.array([0.3, 0.2, -0.1])
    ll_p = log_likelihood(toy, RegressionSpec("poisson"), beta)
    ll_s = log_likelihood(toy, RegressionSpec("sue", g), np.append(beta, 0.0))
    assert ll_s == pytest.approx(ll_p, abs=1e-9)
    ll_g = log_likelihood(toy, RegressionSpec("gamma_count"), np.append(beta, 0.0))
    assert ll_g == pytest.approx(ll_p, abs=1e-7)


@given(st.permutations(list(range(80))))
def test_row_order_invariance(toy, perm):
    spec = RegressionSpec("sue", 2)
    beta = np.array([0.3, 0.2, -0.1, 0.4])
    a = log_likelihood(toy, spec, beta)
    b = log_likelihood(toy.take(np.array(perm)), spec, beta)
    assert b == pytest.approx(a, rel=1e-13)


def test_sentinel():
    ds = CountDataset([50], np.zeros((1, 0)), ())
    assert log_likelihood(ds, RegressionSpec("poisson"), np.array([-800.0])) == -math.inf
    with pytest.raises(NumericalInstabilityError):
        log_likelihood_gradient(ds, RegressionSpec("poisson"), np.array([-800.0]))


def test_intercept_only_poisson_gradient_zero():
    ds = CountDataset([0, 1, 3, 2, 5], np.zeros((5, 0)), ())
    beta = np.array([math.log(2.2)])
    g = log_likelihood_gradient(ds, RegressionSpec("poisson"), beta)
    assert abs(g[0]) < 1e-6


@pytest.mark.parametrize("spec", [RegressionSpec("poisson"), RegressionSpec("sue", 1), RegressionSpec("sue", 3)])
def test_analytic_gradient_matches_fd(toy, spec):
    beta = np.array([0.3, 0.2, -0.1, 0.4])[: spec.n_coef(toy)]
    fd = log_likelihood_gradient(toy, spec, beta, method="fd")
    an = log_likelihood_gradient(toy, spec, beta, method="analytic")
    np.testing.assert_allclose(an, fd, rtol=1e-4, atol=1e-6)


def test_directional_derivative(toy):
    spec = RegressionSpec("sue", 3)
    beta = np.array([0.3, 0.2, -0.1, -0.4])
    v = np.array([0.3, -0.5, 0.8, 0.1])
    h = 1e-5
    central = (log_likelihood(toy, spec, beta + h * v) - log_likelihood(toy, spec, beta - h * v)) / (2 * h)
    assert float(log_likelihood_gradient(toy, spec, beta) @ v) == pytest.approx(central, rel=1e-5)


def test_fitted_moments_poisson_equidispersed(toy):
    fm = fitted_moments(toy, RegressionSpec("poisson"), np.array([0.3, 0.2, -0.1]))
    np.testing.assert_array_equal(fm.mean, fm.variance)


@pytest.mark.parametrize("spec", [RegressionSpec("poisson"), RegressionSpec("sue", 3), RegressionSpec("gamma_count")])
def test_predicted_frequencies_sum_to_one(toy, spec):
    beta = np.array([0.3, 0.2, -0.1, 0.4])[: spec.n_coef(toy)]
    assert predicted_relative_frequencies(toy, spec, beta, 60).sum() == pytest.approx(1.0, abs=1e-8)


def test_intercept_only_poisson_frequencies():
    ds = CountDataset([0, 1, 3, 2, 5], np.zeros((5, 0)), ())
    pred = predicted_relative_frequencies(ds, RegressionSpec("poisson"), np.array([math.log(2.2)]), 6)
    expected = [math.exp(-2.2) * 2.2**n / math.factorial(n) for n in range(7)]
    np.testing.assert_allclose(pred, expected, rtol=1e-13)
    assert sample_relative_frequencies(ds, 6).sum() == pytest.approx(1.0)


def test_zero_column_leaves_optimum_unchanged(toy):
    spec = RegressionSpec("sue", 1, check_rank=False)
    base = fit(toy, spec)
    X = np.column_stack([toy.covariates, np.zeros(toy.n_obs)])
    with pytest.warns(RuntimeWarning, match="not positive definite"):
        padded = fit(CountDataset(toy.responses, X, ("a", "b", "zero")), spec)
    assert padded.loglik == pytest.approx(base.loglik, abs=1e-6)


def test_bids_predicted_ones_exceed_poisson(bids, bids_fits):
    p = predicted_relative_frequencies(bids, bids_fits["poisson"].spec, bids_fits["poisson"].beta_hat, 10)
    s = predicted_relative_frequencies(bids, bids_fits["sue1"].spec, bids_fits["sue1"].beta_hat, 10)
    assert s[1] > p[1]
