import os

import numpy as np
import pytest
from hypothesis import settings

# fixed example streams by default; HYPOTHESIS_PROFILE=explore draws fresh ones
settings.register_profile("default", derandomize=True)
settings.register_profile("explore", derandomize=False, max_examples=1000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from geocano.system import random_system


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def make_systems(seed, count, n_atoms=20, periodic=False, **kwargs):
    rng = np.random.default_rng(seed)
    return [random_system(rng, n_atoms, periodic=periodic, **kwargs) for _ in range(count)]


@pytest.fixture
def molecules():
    return make_systems(1, 6)


@pytest.fixture
def slabs():
    return make_systems(2, 4, periodic=True, tags=True)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
