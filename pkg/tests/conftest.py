import numpy as np
import pytest

from rfadapt.systems import default_system_matrix


@pytest.fixture(scope="session")
def stable_A():
    return default_system_matrix(5, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def fd_hessian(f, r, h=1e-5):
    """Central finite-difference Hessian, the oracle for kernel curvature."""
    n = r.size
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            rpp = r.copy(); rpp[i] += h; rpp[j] += h
            rpm = r.copy(); rpm[i] += h; rpm[j] -= h
            rmp = r.copy(); rmp[i] -= h; rmp[j] += h
            rmm = r.copy(); rmm[i] -= h; rmm[j] -= h
            H[i, j] = (f(rpp) - f(rpm) - f(rmp) + f(rmm)) / (4.0 * h * h)
    return H
