import numpy as np
import pytest

from bbpre import EnvironmentModel, ExpMeanMap, OffspringModel, monogamous


@pytest.fixture
def canonical_env():
    return EnvironmentModel(std=0.5)


@pytest.fixture
def canonical_offspring():
    return OffspringModel()


@pytest.fixture
def canonical_rule():
    return monogamous(1)


@pytest.fixture
def shifted_offspring():
    return OffspringModel(mean_f=ExpMeanMap(shift=0.1), mean_m=ExpMeanMap(shift=0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
