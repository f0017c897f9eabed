import pytest

from leflab import mesh
from leflab.potentials import unit_pair
from leflab.problem import ProblemSpec


@pytest.fixture(scope="session")
def interval_grid():
    return mesh.build_grid("interval", 65)


@pytest.fixture(scope="session")
def fine_interval():
    return mesh.build_grid("interval", 201)


@pytest.fixture(scope="session")
def square_grid():
    return mesh.build_grid("rectangle", 17)


@pytest.fixture(scope="session")
def plus_spec(interval_grid):
    return ProblemSpec(0.5, 3.0, "plus", unit_pair(interval_grid))


@pytest.fixture(scope="session")
def minus_spec(interval_grid):
    return ProblemSpec(0.5, 3.0, "minus", unit_pair(interval_grid))
