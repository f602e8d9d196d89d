import numpy as np
import pytest

from ellgaudin.elliptic import EllipticContext
from ellgaudin.state import ModelSpec, default_marked_points

TAUS = (1j, 0.3 + 0.8j)


@pytest.fixture(params=TAUS, ids=["tau=i", "tau=0.3+0.8i"])
def ctx(request):
    return EllipticContext(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_spec(n, m, npole, tau=1j):
    return ModelSpec(n, m, npole, default_marked_points(npole, tau), tau)


@pytest.fixture
def spec222():
    return make_spec(2, 2, 2)
