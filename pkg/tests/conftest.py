import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure src/ is on sys.path so tests import the package without installing it
SRC_DIR = Path(__file__).resolve().parent.parent / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from harmonic_predictive.problem import ProblemSpec  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale runs (n = 1e6 Monte Carlo, full quadrature oracles)")


@pytest.fixture
def spec_d3():
    return ProblemSpec(d=3, v_x=1.0, v_y=1.0, alpha=0.0)


@pytest.fixture
def spec_d5():
    return ProblemSpec(d=5, v_x=1.0, v_y=1.0, alpha=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
