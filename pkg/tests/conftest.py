"""Shared fixtures: bundled data, fitted curves, and the headline run."""
import time
from types import SimpleNamespace

import pytest
from hypothesis import HealthCheck, settings

from lagbias.analysis import summarize_posterior
from lagbias.data import (bundled_laureates_path, bundled_ratios_path,
                          load_laureates, load_ratios)
from lagbias.hmc import HmcConfig, compute_diagnostics, sample
from lagbias.model import PosteriorDensity, prepare
from lagbias.ratios import fit_all

settings.register_profile(
    "suite",
    max_examples=50,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("suite")

HEADLINE_DELTA = 10


@pytest.fixture(scope="session")
def bundled_records():
    return load_laureates(bundled_laureates_path())


@pytest.fixture(scope="session")
def bundled_points():
    return load_ratios(bundled_ratios_path())


@pytest.fixture(scope="session")
def curves(bundled_points):
    return fit_all(bundled_points)


@pytest.fixture(scope="session")
def headline_data(bundled_records, curves):
    return prepare(bundled_records, curves, HEADLINE_DELTA)


@pytest.fixture(scope="session")
def headline(headline_data):
    """The headline posterior run: bundled data, lag 10, default sampler."""
    config = HmcConfig()
    start = time.perf_counter()
    draws = sample(PosteriorDensity(headline_data), config)
    seconds = time.perf_counter() - start
    diag = compute_diagnostics(draws)
    return SimpleNamespace(
        data=headline_data,
        config=config,
        draws=draws,
        diag=diag,
        summaries=summarize_posterior(draws, diag),
        seconds=seconds,
    )
