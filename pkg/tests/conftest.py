import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from wavecascade.kernelmodel import remark_model  # noqa: E402
from wavecascade.spectrum import SpectralState, make_grid  # noqa: E402

settings.register_profile(
    "repo", deadline=None, derandomize=True, print_blob=True,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def model():
    return remark_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_state(rng, grid, zero_frac=0.2, scale=1.0):
    m = rng.random(grid.n) * scale
    m[rng.random(grid.n) < zero_frac] = 0.0
    return SpectralState(grid, m)


def small_grids():
    return [
        make_grid("uniform", 0.0, 10.0, 5),
        make_grid("uniform", 0.5, 8.5, 8),
        make_grid("geometric", 1.0, 64.0, 6),
        make_grid("geometric", 0.5, 300.0, 8),
    ]
