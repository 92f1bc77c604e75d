import os

import pytest

from copolypin import disorder, excursion

os.environ.setdefault("COPOLYPIN_THREADS", "1")

# lines collected by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pm1_laws():
    return disorder.PM1, disorder.PM1


@pytest.fixture(scope="session")
def power15():
    return excursion.power_law(1.5, 10000)


@pytest.fixture(scope="session")
def srw():
    return excursion.srw_return_law(10000)
