import pytest

from chaindefect.measurement import SGrid
from chaindefect.model import ChainConfig, DefectHypothesis


@pytest.fixture(scope="session")
def chain():
    return ChainConfig()


@pytest.fixture(scope="session")
def truth():
    return DefectHypothesis(40, 1.3)


@pytest.fixture(scope="session")
def grid():
    return SGrid()


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
