#!/usr/bin/env python3
import os
from typing import Callable

import numpy as np
import pytest

import prymlab
from prymlab.config import RunConfig, load_config
from prymlab.theta import PeriodMatrix, validate_period_matrix

file_dir = os.path.split(__file__)[0]
configs_dir = os.path.join(os.path.dirname(prymlab.__file__), "configs")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def random_period_matrix() -> Callable[[np.random.Generator, int], PeriodMatrix]:
    """Factory for well-conditioned random period matrices."""

    def make(gen: np.random.Generator, g: int) -> PeriodMatrix:
        real = gen.uniform(-0.5, 0.5, (g, g))
        factor = gen.uniform(-0.3, 0.3, (g, g))
        imag = factor @ factor.T + np.diag(gen.uniform(0.8, 1.5, g))
        entries = real + real.T + 1j * imag
        return validate_period_matrix(0.5 * (entries + entries.T) if g > 1 else entries)

    return make


@pytest.fixture(scope="session")
def g1_config() -> RunConfig:
    return load_config(os.path.join(configs_dir, "g1_reference.json"))


@pytest.fixture(scope="session")
def g2_config() -> RunConfig:
    return load_config(os.path.join(configs_dir, "g2_reference.json"))


@pytest.fixture(scope="session")
def g1_lab(g1_config: RunConfig):
    with prymlab.Lab(g1_config) as lab:
        lab.prepare()
        yield lab


@pytest.fixture(scope="session")
def g2_lab(g2_config: RunConfig):
    with prymlab.Lab(g2_config) as lab:
        lab.prepare()
        yield lab
