import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bosonpow.linalg import haar_unitary  # noqa: E402
from bosonpow.params import ParameterSet, unitary_ref  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def U6():
    return haar_unitary(6, 11)


@pytest.fixture(scope="session")
def pm6(U6):
    return ParameterSet(N=2, M=6, d_mb=3, d_sb=7, U_ref=unitary_ref(U6), T_mine=100, epsilon=0.05,
                        beta=0.05, R="0.01", P="0.006", stake="20")


@pytest.fixture(scope="session")
def example_config():
    return ROOT / "configs" / "campaign_m6n2.json"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
