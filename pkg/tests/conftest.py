import pytest

from divbench.rng import stream
from divbench.topology import chimera, gen_ran1


@pytest.fixture
def c1_graph():
    return chimera(1)


@pytest.fixture
def c1_ran1(c1_graph):
    return gen_ran1(c1_graph, seed=7)


@pytest.fixture
def rng():
    return stream(20240817, "tests")
