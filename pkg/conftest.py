"""
Shared pytest fixtures: canonical windows and lattices.
"""

from pathlib import Path

import pytest

from core.model import LatticeParams
from core.spline.windows import build_eb_spline, symmetric_eb_spline, two_sided_exponential


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    """Keep user-level GABOR_EB_* settings out of the tests."""
    for key in ("GABOR_EB_CONFIG", "GABOR_EB_THREADS", "GABOR_EB_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)


@pytest.fixture(scope="session")
def hat():
    """B_(0,0): the hat function on [0, 2]."""
    return build_eb_spline([0.0, 0.0])


@pytest.fixture(scope="session")
def spline_4():
    """B_Lambda with Lambda = (-2, -1, 1, 2)."""
    return build_eb_spline([-2.0, -1.0, 1.0, 2.0])


@pytest.fixture(scope="session")
def spline_123():
    return build_eb_spline([1.0, 2.0, 3.0])


@pytest.fixture(scope="session")
def sym_spline():
    """Order-2 symmetric spline with lambda = 1."""
    return symmetric_eb_spline(1.0)


@pytest.fixture(scope="session")
def two_sided():
    """g(x) = e^{-|x|}/2."""
    return two_sided_exponential(1.0)


@pytest.fixture
def lattice_086():
    return LatticeParams.create(1.0, 0.86).with_inferred_rational()


@pytest.fixture
def lattice_2_045():
    return LatticeParams.create(2.0, 0.45).with_inferred_rational()


@pytest.fixture
def repo_root():
    return Path(__file__).resolve().parent
