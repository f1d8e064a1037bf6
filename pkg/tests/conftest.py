import numpy as np
import pytest

from cdwsim import lattice


def make_instances(master_seed, count, L):
    """Deterministic disorder realizations for test loops."""
    return [
        lattice.gen_disorder(lattice.realization_seed(master_seed, r), L)
        for r in range(count)
    ]


def dense_well_coords(m, disorder, lam, F=0.0):
    """Dense linear-system oracle for the untruncated chain, independent of
    the circulant production path."""
    L = disorder.L
    A = np.zeros((L, L))
    for i in range(L):
        A[i, i] = lam + 2.0
        A[i, (i - 1) % L] -= 1.0
        A[i, (i + 1) % L] -= 1.0
    y = np.linalg.solve(A, lam * (m + disorder.alpha) + F)
    return y - m - disorder.alpha


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
