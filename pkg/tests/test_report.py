import math

import numpy as np
import pytest

from suecount.report import (
    FitReport,
    build_report,
    dispersion_split,
    equidispersion_crossing,
    mixture_moments,
    render_table,
)


def test_mixture_moments_brute_force():
    # two equally likely components: Poisson(1) and Poisson(3)
    mean, var, ratio = mixture_moments([1.0, 3.0], [1.0, 3.0])
    ns = np.arange(200)
    from scipy import stats

    pmf = 0.5 * stats.poisson.pmf(ns, 1) + 0.5 * stats.poisson.pmf(ns, 3)
    m = (ns * pmf).sum()
    assert mean == pytest.approx(m, rel=1e-12)
    assert var == pytest.approx((ns**2 * pmf).sum() - m * m, rel=1e-12)
    assert ratio == pytest.approx(var / mean)


def test_crossing_location():
    rate, mean = equidispersion_crossing(0.521, 3)
    assert rate == pytest.approx(3.67, abs=0.01)
    assert equidispersion_crossing(1.0, 3) is None
    assert equidispersion_crossing(2.9, 1) is None  # gamma 1 with alpha > 1 stays underdispersed


def test_bids_report(bids, bids_fits):
    rep = build_report(bids_fits["sue1"], bids)
    assert rep.sample_mean == pytest.approx(1.738, abs=5e-4)
    assert rep.sample_variance == pytest.approx(2.035, abs=5e-4)
    assert len(rep.predicted_frequencies) == 11
    assert len(rep.observations) == 126
    assert all(v < m for m, v in rep.observations)
    assert "Log likelihood" in render_table(rep)


def test_json_round_trip(bids, bids_fits):
    rep = build_report(bids_fits["gamma"], bids)
    text = rep.to_json()
    back = FitReport.from_json(text)
    assert back.to_json() == text
    assert back.loglik == rep.loglik and back.coefficients == rep.coefficients
    assert back.schema == 1


def test_json_non_finite_values(bids, bids_fits):
    rep = build_report(bids_fits["poisson"], bids)
    assert rep.dispersion["crossing_mean"] == math.inf
    back = FitReport.from_json(rep.to_json())
    assert back.dispersion["crossing_mean"] == math.inf


def test_schema_version_checked(bids, bids_fits):
    d = build_report(bids_fits["poisson"], bids).to_dict()
    d["schema"] = 99
    with pytest.raises(ValueError):
        FitReport.from_dict(d)


def test_split_counts_poisson(bids, bids_fits):
    split = dispersion_split(bids_fits["poisson"], bids)
    assert split.equi == 126 and split.under == split.over == 0
