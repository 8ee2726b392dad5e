"""Shared fixtures: quadratures and normalized kernels reused across tests."""

import numpy as np
import pytest

from homoboltz.kernels import build_quadrature, isotropic_kernel, normalize_kernel


@pytest.fixture(scope="session")
def quad3():
    return build_quadrature(3, 16)


@pytest.fixture(scope="session")
def quad3_small():
    """Coarser rule for grid operators (polar 8 x azimuth 16)."""
    return build_quadrature(3, 8)


@pytest.fixture(scope="session")
def quad2():
    return build_quadrature(2, 256)


@pytest.fixture(scope="session")
def quad2_small():
    return build_quadrature(2, 64)


@pytest.fixture(scope="session")
def iso3(quad3):
    return normalize_kernel(isotropic_kernel(3), quad3)


@pytest.fixture(scope="session")
def iso2(quad2):
    return normalize_kernel(isotropic_kernel(2), quad2)


@pytest.fixture(autouse=True)
def _silence_smallness_warning():
    """dominant_eigenpair warns outside the perturbative gate; tests opt in."""
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=r"\|\|A\|\| =")
        yield


def shear_matrix(d: int, K: float) -> np.ndarray:
    A = np.zeros((d, d))
    A[0, 1] = K
    return A
