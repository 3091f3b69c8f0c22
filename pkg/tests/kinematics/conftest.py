import pytest

from nedlin.flow import LinearSystem
from nedlin.kinematics.transform import KinematicTransform


@pytest.fixture
def isotropic():
    return LinearSystem.from_rows([["-1", 0.0], [0.0, "-1"]])


@pytest.fixture
def rotation():
    """Orthogonal S(t): M1 = 1, beta = 0; derivative left to central differences."""
    return KinematicTransform(S=[["cos(t)", "sin(t)"], ["-sin(t)", "cos(t)"]], delta=0.5, K_de=1.0)


@pytest.fixture
def rotation_exact():
    return KinematicTransform(
        S=[["cos(t)", "sin(t)"], ["-sin(t)", "cos(t)"]],
        S_dot=[["-sin(t)", "cos(t)"], ["-cos(t)", "-sin(t)"]],
    )


@pytest.fixture
def shear():
    return KinematicTransform(S=[["1", "t"], [0.0, "1"]], M1=6.0, delta=1.0, K_de=5.0)
