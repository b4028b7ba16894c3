import pytest

from blockverify.smt import find_solver

SOLVER = find_solver()

needs_solver = pytest.mark.skipif(SOLVER is None, reason="no SMT-LIB2 solver on PATH")

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
