import pytest

from prandtl_lab.blasius import default_table


@pytest.fixture(scope="session")
def table():
    return default_table()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
