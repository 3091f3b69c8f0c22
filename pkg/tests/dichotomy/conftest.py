import pytest

from nedlin.flow import LinearSystem, catalog


@pytest.fixture(scope="module")
def decay():
    return catalog("scalar_autonomous", {"lambda0": -1.0})[0]


@pytest.fixture(scope="module")
def growth():
    return LinearSystem.from_rows([["1"]])


@pytest.fixture(scope="module")
def bv():
    return catalog("bv_scalar", {"omega": 3.0, "a": 1.0})


@pytest.fixture(scope="module")
def two_rates():
    return catalog("diagonal_autonomous", {"lambda1": -1.0, "lambda2": -2.0})[0]
