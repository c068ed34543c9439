import numpy as np
import pytest

from partdiss import (FilterBank, Grid, build_isentropic_euler,
                      build_linearized_euler, construct)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def euler1d():
    return build_linearized_euler(1, 1.0)


@pytest.fixture(scope="session")
def euler2d():
    return build_linearized_euler(2, 1.0)


@pytest.fixture(scope="session")
def gas1d():
    # gamma = 2 with a = 1/8 gives unit base sound speed
    return build_isentropic_euler(1, 2.0, 0.125, 1.0)


@pytest.fixture(scope="session")
def cert1d(euler1d):
    return construct(euler1d)


@pytest.fixture(scope="session")
def cert2d(euler2d):
    return construct(euler2d)


@pytest.fixture(scope="session")
def grid64():
    return Grid((64,), 1.0)


@pytest.fixture(scope="session")
def bank64(grid64):
    return FilterBank(grid64)
