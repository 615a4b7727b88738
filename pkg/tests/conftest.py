import numpy as np
import pytest

from subrie.fields import builtin_model
from subrie.flows import IntegratorConfig


@pytest.fixture(scope="session")
def heis():
    return builtin_model("heisenberg")


@pytest.fixture(scope="session")
def engel():
    return builtin_model("engel")


@pytest.fixture(scope="session")
def cartan():
    return builtin_model("cartan")


@pytest.fixture(scope="session")
def cfg():
    return IntegratorConfig(step=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
