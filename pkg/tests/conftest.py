import numpy as np
import pytest

from grac.lattice import Box
from grac.partition import Hexagon, build_partition
from grac.potentials import make_potential


def potential_zoo():
    return [
        make_potential("quadratic", kappa=[1.0, 0.5, 0.8, 1.0, 0.5, 0.8]),
        make_potential("morse", depth=1.0, alpha=4.0, r0=1.0),
        make_potential("bond_angle", kappa=1.0),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=potential_zoo(), ids=lambda V: V.name)
def potential(request):
    return request.param


@pytest.fixture
def morse():
    return make_potential("morse", depth=1.0, alpha=4.0, r0=1.0)


@pytest.fixture
def box():
    return Box.centred(8)


@pytest.fixture
def hexagon_partition(box):
    return build_partition(Hexagon(3), box)


@pytest.fixture
def strained(rng):
    """A homogeneous gradient at Frobenius distance 0.1 from the identity."""
    P = rng.standard_normal((2, 2))
    return np.eye(2) + 0.1 * P / np.linalg.norm(P)
