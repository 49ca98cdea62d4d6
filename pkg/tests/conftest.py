import numpy as np
import pytest

from noisyqaoa import WeightedGraph, problem_hamiltonian, table1_graph


@pytest.fixture(scope="session")
def table1():
    return table1_graph()


@pytest.fixture(scope="session")
def table1_h(table1):
    return problem_hamiltonian(table1)


@pytest.fixture(scope="session")
def single_edge():
    """Two nodes joined by a unit-weight edge."""
    return WeightedGraph(2, ((0, 1, 1.0),))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
