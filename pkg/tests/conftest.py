import numpy as np
import pytest

from framefem.mesh import generate_mesh


@pytest.fixture(scope="session")
def interval4():
    return generate_mesh("interval", 4)


@pytest.fixture(scope="session")
def square1():
    return generate_mesh("unit_square", 1)


@pytest.fixture(scope="session")
def square2():
    return generate_mesh("unit_square", 2)


@pytest.fixture(scope="session")
def cube1():
    return generate_mesh("unit_cube", 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
