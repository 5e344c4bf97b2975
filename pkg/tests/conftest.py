import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record a status line; the lines are echoed in the terminal summary even when output is captured."""
    def add(line):
        ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
