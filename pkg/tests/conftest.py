from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SWISS_CSV = ROOT / "data" / "swiss.csv"

ACCEPTANCE_LINES = []


def record(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture
def swiss_path():
    return SWISS_CSV


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
