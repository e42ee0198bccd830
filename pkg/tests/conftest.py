import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data" / "oracle_values.json"

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def oracle_values():
    return json.loads(DATA.read_text())


@pytest.fixture
def acceptance():
    """``record(label, ok, detail)`` stores and prints one pass/fail line."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
