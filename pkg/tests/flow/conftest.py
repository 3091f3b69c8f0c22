import pytest

from nedlin.flow import NonlinearPerturbation, catalog


@pytest.fixture
def decay():
    sys, flow = catalog("scalar_autonomous", {"lambda0": -1.0})
    return sys, flow


@pytest.fixture
def bv():
    sys, flow = catalog("bv_scalar", {"omega": 3.0, "a": 1.0})
    return sys, flow


@pytest.fixture
def bounded_sine():
    """f(t, x) = 0.1 exp(-2t) sin(x1): class A2 with L_f = 0.1, beta = 1."""
    return NonlinearPerturbation(f=["0.1*exp(-2*t)*sin(x1)"], L_f=0.1, beta=1.0, K0=0.0, class_tag="A2")
