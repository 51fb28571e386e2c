import warnings

import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")

from mvdividend import ModelParams, solve_equilibrium  # noqa: E402

ANCHOR = dict(a=1.0, b=0.25, rho=0.2)

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def anchor():
    return ModelParams(**ANCHOR)


@pytest.fixture(scope="session")
def sol13():
    return solve_equilibrium(ModelParams(**ANCHOR, gamma=0.13)).solution


@pytest.fixture(scope="session")
def sol15():
    return solve_equilibrium(ModelParams(**ANCHOR, gamma=0.15)).solution
