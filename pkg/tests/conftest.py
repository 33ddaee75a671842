import numpy as np
import pytest

from sequifilt import parse_measurements
from sequifilt.cli import bundled_config, load_config


@pytest.fixture(scope="session")
def run_config():
    return load_config(bundled_config())


@pytest.fixture(scope="session")
def measurements(run_config):
    return parse_measurements(run_config.data).observations()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
