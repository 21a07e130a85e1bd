"""Shared fixtures: small parameter sets and frozen synthetic datasets."""

from __future__ import annotations

import numpy as np
import pytest

from epiabc.model import Parameters, PopulationState
from epiabc.simulate import warm_up
from epiabc.study import standard_sir_dataset


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernel():
    """Compile the numba kernels once so per-test timings are honest."""
    warm_up()


@pytest.fixture
def ct_params() -> Parameters:
    """Contact-tracing parameters for a small, busy epidemic."""
    return Parameters(mu1=0.05, lambda1=0.01, lambda2=0.4, lambda3=0.3, c=1.0)


@pytest.fixture
def small_init() -> PopulationState:
    return PopulationState(t=0.0, S=80, I=4)


@pytest.fixture(scope="session")
def three_detections():
    """Frozen 3-detection standard-SIR dataset observed over [0, 4]."""
    return standard_sir_dataset(0.12, 1.0, s0=9, i0=1, seed=9, horizon=4.0)


@pytest.fixture(scope="session")
def many_detections():
    """Frozen 29-detection standard-SIR dataset observed over [0, 5]."""
    return standard_sir_dataset(0.12, 1.0, s0=30, i0=1, seed=0, horizon=5.0)
