import numpy as np
import pytest

from visionsim.optics import RefractionProfile
from visionsim.task import SceneLayout


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def emmetrope():
    return RefractionProfile.emmetropic()


@pytest.fixture
def office():
    return SceneLayout.default_office()
