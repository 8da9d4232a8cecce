import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from suecount.data import load_dataset
from suecount.inference import fit
from suecount.regression import CountDataset, RegressionSpec

settings.register_profile("repo", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def bids():
    return load_dataset("bids")


@pytest.fixture(scope="session")
def bids_fits(bids):
    return {
        "poisson": fit(bids, RegressionSpec("poisson")),
        "gamma": fit(bids, RegressionSpec("gamma_count")),
        "sue1": fit(bids, RegressionSpec("sue", 1)),
    }


@pytest.fixture(scope="session")
def toy():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(80, 2))
    y = rng.poisson(np.exp(0.4 + 0.3 * X[:, 0] - 0.2 * X[:, 1]))
    return CountDataset(y, X, ("a", "b"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
