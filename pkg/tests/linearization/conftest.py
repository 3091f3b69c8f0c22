import pytest

from nedlin.flow import NonlinearPerturbation, catalog
from nedlin.primitives.models import ContractionCertificate


@pytest.fixture(scope="module")
def decay():
    return catalog("scalar_autonomous", {"lambda0": -1.0})[0]


@pytest.fixture(scope="module")
def decay_cert():
    return ContractionCertificate(K=1.0, alpha=1.0, mu=0.0)


@pytest.fixture(scope="module")
def constant_push():
    """f(t, x) = 0.5: class A1, Lipschitz constant 0."""
    return NonlinearPerturbation(f=["0.5"], L_f=0.0, K0=0.5, class_tag="A1")


@pytest.fixture(scope="module")
def shifted_sine():
    return NonlinearPerturbation(f=["0.2*exp(-2*t)*sin(x1) + 0.3"], L_f=0.2, beta=1.0, K0=0.3, class_tag="A1")


@pytest.fixture(scope="module")
def bounded_sine():
    return NonlinearPerturbation(f=["0.1*exp(-2*t)*sin(x1)"], L_f=0.1, beta=1.0, K0=0.0, class_tag="A2")
