import numpy as np
import pytest

from microrheo.exactsim import fgle_increment_covariance
from microrheo.spectral import fgle_params_from_physical


@pytest.fixture(scope="session")
def fgle_params_quarter():
    """The workhorse parameter set: d = 0.25, drag 2, mass 1, kBT 1."""
    return fgle_params_from_physical(2.0, 1.0, 1.0, 0.75)


@pytest.fixture(scope="session")
def increment_cov_quarter(fgle_params_quarter):
    return fgle_increment_covariance(fgle_params_quarter, 512, tol=1e-8)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed, *key):
        return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))

    return make
