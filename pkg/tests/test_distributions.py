import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate, stats

from suecount.distributions import (
    SueParams,
    classify_dispersion,
    sue_dispersion,
    sue_logpmf,
    sue_logpmf_array,
    sue_mean,
    sue_pmf,
    sue_pmf_direct,
    sue_pmf_series,
    sue_pmf_table,
    sue_second_moment,
    variance_minus_mean_gamma_one,
    vm_surface,
)
from suecount.exceptions import DomainError, NumericalInstabilityError

# (gamma_event, rate, alpha, exposure, n) -> P{N(t) = n}, from 40-digit
# quadrature of P{S_n <= t} - P{S_{n+1} <= t} with S_k the k-th arrival time
ORACLE = {
    (3, 2.7, 0.5, 1, 4): 0.10006257324431159462,
    (3, 2.7, 0.5, 1, 2): 0.40522922282991823434,
    (1, 2, 2, 1, 3): 0.2340392886957570232,
    (1, 2, 0.3, 1, 0): 0.54881163609402644481,
    (1, 2, 0.3, 1, 5): 0.013962708783228757892,
    (2, 5, 2.5, 1, 1): 0.0044894802306089256171,
    (2, 5, 2.5, 1, 7): 0.13071566501285816382,
    (4, 3, 0.2, 2, 3): 0.50441840666472804766,
    (4, 3, 0.2, 2, 6): 0.080196259375798932938,
    (1, 40, 0.1, 1, 30): 0.037248662276727366738,
    (3, 40, 0.05, 1, 38): 0.024785692223376832904,
    (2, 0.5, 1.000001, 1, 2): 0.075816395644345169605,
    (6, 8, 3, 1, 12): 0.06317253978226632403,
    (3, 60, 2.5, 1, 55): 0.041282879145813636586,
}

params_st = st.builds(
    SueParams,
    rate=st.floats(0.05, 15.0),
    alpha=st.floats(0.05, 4.0),
    gamma_event=st.integers(1, 6),
    exposure=st.sampled_from([0.5, 1.0, 2.0]),
)


def poisson(n, mu):
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


@pytest.mark.parametrize("case", sorted(ORACLE))
def test_frozen_quadrature_oracle(case):
    g, lam, a, t, n = case
    assert sue_pmf(SueParams(lam, a, g, t), n) == pytest.approx(ORACLE[case], rel=1e-12)


def test_live_quadrature_gamma_three():
    # P{N = 4} for gamma_event 3 by double quadrature of the arrival densities
    lam, a, t = 2.7, 0.5, 1.0

    def cdf_arrival(k):
        m = k - 1
        dens = lambda s: stats.gamma.pdf(s, m, scale=1 / lam) * -math.expm1(-a * lam * (t - s))
        return integrate.quad(dens, 0, t, epsabs=1e-14, epsrel=1e-13)[0]

    expected = cdf_arrival(4) - cdf_arrival(5)
    assert sue_pmf(SueParams(lam, a, 3, t), 4) == pytest.approx(expected, rel=1e-9)


def test_worked_examples():
    assert sue_pmf_direct(SueParams(2, 2, 1), 0) == pytest.approx(math.exp(-4), rel=1e-14)
    assert sue_pmf_direct(SueParams(2.7, 0.5, 3), 1) == pytest.approx(2.7 * math.exp(-2.7), rel=1e-14)
    p, terms = sue_pmf_series(SueParams(2, 2, 1), 0)
    assert p == pytest.approx(math.exp(-4), rel=1e-14) and terms >= 1
    assert sue_mean(SueParams(2, 2, 1)) == pytest.approx(2.490842180555633, rel=1e-14)


def test_direct_form_rejects_alpha_one():
    with pytest.raises(DomainError):
        sue_pmf_direct(SueParams(2, 1.0, 2), 3)


def test_direct_form_detects_cancellation():
    with pytest.raises(NumericalInstabilityError):
        sue_pmf_direct(SueParams(0.5, 1.000001, 2), 2)


@pytest.mark.parametrize("bad", [dict(rate=0), dict(alpha=-1), dict(exposure=0), dict(gamma_event=0),
                                 dict(gamma_event=1.5), dict(rate=math.inf)])
def test_param_validation(bad):
    kw = dict(rate=1.0, alpha=1.0, gamma_event=1, exposure=1.0) | bad
    with pytest.raises(DomainError):
        SueParams(**kw)


def test_negative_count():
    with pytest.raises(DomainError):
        sue_pmf(SueParams(1, 2, 1), -1)


def test_series_at_alpha_one_is_poisson():
    for n in range(10):
        p, _ = sue_pmf_series(SueParams(2.7, 1.0, 3), n)
        assert p == pytest.approx(poisson(n, 2.7), rel=1e-14)


@given(params_st, st.integers(0, 40))
def test_poisson_limit(params, n):
    p = SueParams(params.rate, 1.0, params.gamma_event, params.exposure)
    assert sue_pmf(p, n) == pytest.approx(poisson(n, p.mu), rel=1e-14, abs=1e-300)


@given(params_st, st.integers(0, 50))
def test_continuity_at_alpha_one(params, n):
    base = sue_pmf(SueParams(params.rate, 1.0, params.gamma_event, params.exposure), n)
    for a in (1 - 1e-8, 1 + 1e-8):
        assert abs(sue_pmf(SueParams(params.rate, a, params.gamma_event, params.exposure), n) - base) <= 1e-6


@given(params_st, st.integers(0, 30))
def test_form_agreement(params, n):
    assume(abs(1 - params.alpha) * params.mu >= 1 and not 0.99 < params.alpha < 1.01)
    assume(abs(params.x) <= 30)
    p_series, _ = sue_pmf_series(params, n)
    try:
        p_direct = sue_pmf_direct(params, n)
    except NumericalInstabilityError:
        return  # the direct form refused an ill-conditioned case
    assert p_direct == pytest.approx(p_series, rel=1e-10, abs=1e-300)


@given(params_st, st.integers(0, 4))
def test_poisson_prefix(params, n):
    assume(n < params.gamma_event - 1)
    assert sue_pmf(params, n) == poisson(n, params.mu) or sue_pmf(params, n) == pytest.approx(
        poisson(n, params.mu), rel=1e-15
    )


def _pmf_sum_moments(p):
    top = int(p.mu + 40 * math.sqrt(p.mu) + 60)
    probs = np.array([sue_pmf(p, n) for n in range(top)])
    ns = np.arange(top)
    return probs.sum(), math.fsum(ns * probs), math.fsum(ns * ns * probs)


@given(params_st)
def test_normalisation(params):
    total, _, _ = _pmf_sum_moments(params)
    assert abs(total - 1) <= 1e-9


@given(st.floats(0.1, 10.0), st.floats(0.1, 3.0), st.integers(1, 6))
def test_moments_match_pmf_sums(rate, alpha, g):
    p = SueParams(rate, alpha, g)
    _, m1, m2 = _pmf_sum_moments(p)
    assert sue_mean(p) == pytest.approx(m1, rel=1e-8)
    assert sue_second_moment(p) == pytest.approx(m2, rel=1e-8)


@given(st.floats(0.05, 20.0), st.floats(0.05, 4.0))
def test_variance_mean_identity(rate, alpha):
    p = SueParams(rate, alpha, 1)
    a, u = alpha, alpha * rate
    identity = 2 * (1 - a) / a**2 * math.exp(-u) * (a * (math.cosh(u) - 1) + math.sinh(u) - u)
    assert variance_minus_mean_gamma_one(p) == pytest.approx(identity, rel=1e-8, abs=1e-300)
    s = sue_dispersion(p)
    assert s.variance - s.mean == pytest.approx(identity, rel=1e-8, abs=1e-12)


@given(st.integers(1, 6), st.floats(0.2, 10.0), st.floats(0.05, 3.5), st.floats(1.01, 1.5))
def test_concentration_decreases_in_alpha(g, rate, alpha, factor):
    lo = sue_pmf(SueParams(rate, alpha, g), g - 1)
    hi = sue_pmf(SueParams(rate, alpha * factor, g), g - 1)
    assert hi < lo


@given(params_st, st.integers(0, 60))
def test_table_invariants(params, n_max):
    table = sue_pmf_table(params, n_max)
    assert len(table.probs) == n_max + 1
    assert all(0 <= p <= 1 for p in table.probs)
    assert abs(math.fsum(table.probs) + table.tail_mass - 1) <= 1e-12
    assert table.tail_mass >= -1e-12
    assert set(table.form_used) <= {"direct", "series"}


def test_far_regime_uses_direct_form():
    table = sue_pmf_table(SueParams(60, 2.5, 3), 60)
    assert "direct" in table.form_used


def test_dispersion_sign_rule():
    assert sue_dispersion(SueParams(2, 0.5, 1)).classification == "over"
    assert sue_dispersion(SueParams(2, 2.0, 1)).classification == "under"
    assert sue_dispersion(SueParams(2, 1.0, 1)).classification == "equi"
    assert classify_dispersion(1.0, 1.0 + 5e-11) == "equi"


def test_vm_surface():
    s = vm_surface(1, [0.5, 2, 7], [1.0], 1.0)
    np.testing.assert_allclose(s.ratio[:, 0], 1.0, atol=1e-12)
    assert vm_surface(1, [2.0], [0.5]).ratio[0, 0] > 1
    g3 = vm_surface(3, [3.4, 3.9], [0.521]).ratio[:, 0] - 1
    assert g3[0] * g3[1] < 0
    assert len(list(s.rows())) == 3


@given(params_st, st.integers(0, 40))
def test_array_matches_scalar(params, n):
    lp = sue_logpmf_array(np.array([n]), np.array([params.rate]), params.alpha, params.gamma_event,
                          params.exposure)
    assert float(lp[0]) == pytest.approx(sue_logpmf(params, n), rel=1e-11, abs=1e-11)


@given(params_st, st.integers(0, 25))
def test_log_link_derivatives(params, n):
    lp, d_rate, d_alpha = sue_logpmf_array(
        np.array([n]), np.array([params.rate]), params.alpha, params.gamma_event, params.exposure, True
    )
    h = 1e-6

    def at(rate, alpha):
        return sue_logpmf(SueParams(rate, alpha, params.gamma_event, params.exposure), n)

    fd_rate = (at(params.rate * math.exp(h), params.alpha) - at(params.rate * math.exp(-h), params.alpha)) / (2 * h)
    fd_alpha = (at(params.rate, params.alpha * math.exp(h)) - at(params.rate, params.alpha * math.exp(-h))) / (2 * h)
    assert d_rate[0] == pytest.approx(fd_rate, rel=1e-5, abs=1e-6)
    assert d_alpha[0] == pytest.approx(fd_alpha, rel=1e-5, abs=1e-6)
