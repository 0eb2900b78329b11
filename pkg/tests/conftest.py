"""Shared fixtures: acceptance criteria report one line each at session end."""

import pytest

_LINES = []


@pytest.fixture
def acceptance_line():
    """Collect 'criterion NN name: PASS/FAIL detail' lines for the summary."""

    def record(text):
        _LINES.append(text)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
