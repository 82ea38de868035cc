"""Shared fixtures: published data-matrix problems and one full pipeline
run per fast benchmark (session-scoped -- closed-loop runs are expensive)."""

import numpy as np
import pytest

from assosm import benchmark_spec, run_pipeline
from assosm import fixtures as fx
from assosm.data import NoiseBound
from assosm.design import DesignProblem


@pytest.fixture(scope="session")
def b1_run():
    return run_pipeline(benchmark_spec("b1", seed=1))


@pytest.fixture(scope="session")
def b2_run():
    return run_pipeline(benchmark_spec("b2", seed=1))


@pytest.fixture(scope="session")
def b1_fixture_problem():
    bound = NoiseBound(np.array([[fx.B1_GAMMA_GRAM]]), fx.B1_GAMMA_GRAM / 3.0)
    return DesignProblem(fx.B1_O1, fx.B1_O2, fx.B1_O1PLUS, bound)


@pytest.fixture(scope="session")
def b2_fixture_problem():
    bound = NoiseBound(np.array([[fx.B2_GAMMA_GRAM]]), fx.B2_GAMMA_GRAM / 3.0)
    return DesignProblem(fx.B2_O1, fx.B2_O2, fx.B2_O1PLUS, bound)
