from __future__ import annotations

import numpy as np
import pytest

from contact_metric import (Domain, build_simplified_B, build_structure, parse, riccati_zeta_field,
                           solve_zeta_linear)
from contact_metric.contact_solver import QuadratureConfig

BOX = Domain((0.5, 0.5, 0.5), (2.0, 2.0, 2.0), (8, 8, 8), excluded=("x2",))


def random_points(n, seed, lo=0.5, hi=2.0):
    return np.random.default_rng(seed).uniform(lo, hi, size=(n, 3))


@pytest.fixture(scope="session")
def box():
    return BOX


@pytest.fixture(scope="session")
def pts20():
    return random_points(20, 20261014)


@pytest.fixture(scope="session")
def example_B():
    """Worked example with zeta from the Riccati quadrature (K = 1)."""
    zeta = riccati_zeta_field("0", "x2", "1", "1", QuadratureConfig(256, 1.0))
    return build_simplified_B("0", "x2", "x1", "1", zeta, domain=BOX, provenance="riccati")


@pytest.fixture(scope="session")
def example_closed_B():
    """Worked example with the closed-form zeta = -1/x2^2."""
    return build_simplified_B("0", "x2", "x1", "1", parse("-1/x2^2"), domain=BOX)


@pytest.fixture(scope="session")
def example(example_B):
    return build_structure(example_B)


@pytest.fixture(scope="session")
def example_closed(example_closed_B):
    return build_structure(example_closed_B)


@pytest.fixture(scope="session")
def diagonal_B():
    """alpha = 0, beta = 1, epsilon = 0, F = 0, zeta = -2: a metric fixture only (eta = dx1 is not contact)."""
    return build_simplified_B("0", "1", "0", "0", "-2", domain=BOX)


@pytest.fixture(scope="session")
def linear_B():
    """Linear branch: alpha = x3, beta = 1, epsilon = 0, F = 0, zeta solved (= -2)."""
    zeta = solve_zeta_linear("x3", "1", "0", BOX)
    return build_simplified_B("x3", "1", "0", "0", zeta, domain=BOX, provenance="linear")


@pytest.fixture(scope="session")
def linear(linear_B):
    return build_structure(linear_B)
