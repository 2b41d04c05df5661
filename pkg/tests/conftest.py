"""Shared pytest hooks for the test suite."""

import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance PASS/FAIL lines past output capture."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
