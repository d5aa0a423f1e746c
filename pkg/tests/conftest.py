"""
测试共用的fixture
"""

import numpy as np
import pytest

from crackfield.core.lattice import LatticeDomain
from crackfield.core.potential import GaussianPotential, QuadraticPotential
from crackfield.core.solver import SolveSettings


@pytest.fixture(scope="session")
def small_domain():
    return LatticeDomain(8)


@pytest.fixture(scope="session")
def medium_domain():
    return LatticeDomain(16)


@pytest.fixture
def gaussian():
    return GaussianPotential()


@pytest.fixture
def quadratic():
    return QuadraticPotential()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tight():
    """线性问题用的严格容差"""
    return SolveSettings(tol_linf=1e-11, linear_rtol=1e-12)
