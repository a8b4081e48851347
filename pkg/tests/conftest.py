import numpy as np
import pytest

from dlnflow import ProblemInstance


def random_k_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    """Symmetric, strictly diagonally dominant, nonpositive off-diagonals.

    Independent of the package's instance generator on purpose: property
    tests should not inherit its construction choices.
    """
    off = np.triu(-rng.uniform(0.0, 1.0, size=(d, d)), k=1)
    off = off + off.T
    diag = np.abs(off).sum(axis=1) + rng.uniform(0.2, 1.5, size=d)
    return off + np.diag(diag)


def random_instance(rng: np.random.Generator, d: int) -> ProblemInstance:
    M = random_k_matrix(rng, d)
    r = rng.uniform(0.3, 2.0, size=d)
    return ProblemInstance(M=M, r=r)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tridiag_instance():
    """M = [[2,-1],[-1,2]], r = (1,1): the smallest coupled example."""
    return ProblemInstance(M=[[2.0, -1.0], [-1.0, 2.0]], r=[1.0, 1.0])


@pytest.fixture
def separable_instance():
    """M = I_2, r = (2,1): coordinates evolve as independent logistics."""
    return ProblemInstance(M=np.eye(2), r=[2.0, 1.0])
