import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given
from hypothesis import strategies as st

from suecount.baseline import (
    GammaCountParams,
    PoissonParams,
    gamma_count_moments,
    gamma_count_pmf,
    gamma_count_pmf_array,
    poisson_pmf,
)
from suecount.exceptions import DomainError


def test_poisson_pmf():
    assert poisson_pmf(PoissonParams(2.0), 3) == pytest.approx(math.exp(-2) * 8 / 6, rel=1e-15)
    with pytest.raises(DomainError):
        poisson_pmf(PoissonParams(2.0), 1.5)
    with pytest.raises(DomainError):
        PoissonParams(0.0)


@given(st.floats(0.05, 30.0), st.floats(0.1, 5.0), st.integers(0, 60))
def test_gamma_count_matches_scipy(rate, alpha, n):
    hi = scipy.special.gammainc((n + 1) * alpha, rate)
    lo = 1.0 if n == 0 else scipy.special.gammainc(n * alpha, rate)
    p = gamma_count_pmf(GammaCountParams(rate, alpha), n)
    assert p == pytest.approx(lo - hi, rel=1e-8, abs=1e-13)


@given(st.floats(0.05, 20.0), st.integers(0, 40))
def test_gamma_count_alpha_one_is_poisson(rate, n):
    p = gamma_count_pmf(GammaCountParams(rate, 1.0), n)
    assert p == pytest.approx(poisson_pmf(PoissonParams(rate), n), rel=1e-9, abs=1e-14)


@given(st.floats(0.1, 15.0), st.floats(0.2, 4.0))
def test_gamma_count_normalised(rate, alpha):
    ns = np.arange(400)
    assert gamma_count_pmf_array(ns, rate, alpha).sum() == pytest.approx(1.0, abs=1e-9)


def test_gamma_count_moments_dispersion():
    m, v = gamma_count_moments(GammaCountParams(3.0, 1.0))
    assert m == pytest.approx(3.0, rel=1e-9) and v == pytest.approx(3.0, rel=1e-8)
    m, v = gamma_count_moments(GammaCountParams(3.0, 2.0))
    assert v < m  # shape > 1: more regular arrivals
    m, v = gamma_count_moments(GammaCountParams(3.0, 0.5))
    assert v > m


def test_exposure_scales_rate():
    a = gamma_count_pmf(GammaCountParams(1.5, 1.7, exposure=2.0), 2)
    b = gamma_count_pmf(GammaCountParams(3.0, 1.7), 2)
    assert a == pytest.approx(b, rel=1e-14)
