"""Shared fixtures: tiny deterministic problem instances."""

import numpy as np
import pytest

from simcim_rl import CouplingMatrix, generate_erdos_renyi


@pytest.fixture
def single_edge() -> CouplingMatrix:
    return CouplingMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))


@pytest.fixture
def triangle() -> CouplingMatrix:
    j = -(np.ones((3, 3)) - np.eye(3))
    return CouplingMatrix(j)


@pytest.fixture
def four_cycle() -> CouplingMatrix:
    w = np.zeros((4, 4))
    for a, b in [(0, 1), (1, 2), (2, 3), (3, 0)]:
        w[a, b] = w[b, a] = 1.0
    return CouplingMatrix(-w)


@pytest.fixture
def er16() -> CouplingMatrix:
    return generate_erdos_renyi(16, 0.3, seed=0)


def random_symmetric(n: int, rng: np.random.Generator) -> CouplingMatrix:
    """Dense random symmetric coupling matrix with zero diagonal."""
    a = rng.standard_normal((n, n))
    j = (a + a.T) / 2.0
    np.fill_diagonal(j, 0.0)
    return CouplingMatrix(j)
