import numpy as np
import pytest

from bilbt import BilinearSystem
from bilbt.verification import random_ms_stable_system, worked_2x2


@pytest.fixture
def scalar_sys():
    """a = -1, n1 = 0.5, b = c = 1: closed forms are known for every Gramian."""
    return BilinearSystem.from_matrices([[-1.0]], [[1.0]], [[[0.5]]], [[1.0]])


@pytest.fixture
def worked_sys():
    return worked_2x2()


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def make_random_system(seed, n=4, m=1, p=1):
    return random_ms_stable_system(n, m, p, np.random.default_rng(seed))
