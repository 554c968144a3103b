import logging

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def _quiet_density_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="warpcone.geometry")
    caplog.set_level(logging.ERROR, logger="warpcone.partition")


def record_acceptance(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
