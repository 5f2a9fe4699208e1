import numpy as np
import pytest

from condtau.kernels import KernelSpec
from condtau.sample import Sample


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_sample():
    """make_sample(rng, n, p=1, ties=False): Gaussian X, uniform Z on [0, 1]^p."""

    def make(rng, n, p=1, ties=False):
        x = rng.standard_normal((n, 2))
        if ties:
            x = np.round(x, 1)
        z = rng.uniform(0.0, 1.0, size=(n, p))
        return Sample(x=x, z=z)

    return make


@pytest.fixture
def epa():
    return KernelSpec()


@pytest.fixture
def small_sample(rng, make_sample):
    return make_sample(rng, 30)


@pytest.fixture
def concordant_pair():
    return Sample(x=[[0.0, 0.0], [1.0, 1.0]], z=[0.0, 0.0])


@pytest.fixture
def discordant_pair():
    return Sample(x=[[0.0, 1.0], [1.0, 0.0]], z=[0.0, 0.0])
