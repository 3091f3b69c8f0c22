import pytest

from nedlin.dichotomy.certificates import fit_contraction
from nedlin.flow import LinearSystem, NonlinearPerturbation, catalog
from nedlin.primitives.models import ContractionCertificate


@pytest.fixture(scope="module")
def decay():
    return catalog("scalar_autonomous", {"lambda0": -1.0})[0]


@pytest.fixture(scope="module")
def decay_cert():
    """Exact certificate of x' = -x."""
    return ContractionCertificate(K=1.0, alpha=1.0, mu=0.0)


@pytest.fixture(scope="module")
def growth():
    return LinearSystem.from_rows([["1"]])


@pytest.fixture(scope="module")
def bv():
    return catalog("bv_scalar", {"omega": 3.0, "a": 1.0})


@pytest.fixture(scope="module")
def bv_cert(bv):
    return fit_contraction(bv[0])


@pytest.fixture
def bounded_sine():
    return NonlinearPerturbation(f=["0.1*exp(-2*t)*sin(x1)"], L_f=0.1, beta=1.0, K0=0.0, class_tag="A2")
