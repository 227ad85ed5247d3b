"""Shared pytest wiring.

The acceptance tests collect one verdict line each; reprint them as a
block after the run so the pass/fail state of every numbered criterion
is visible in one place regardless of output capturing.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for name in ("test_acceptance", "tests.test_acceptance"):
        mod = sys.modules.get(name)
        if mod is not None and getattr(mod, "VERDICT_LINES", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.VERDICT_LINES:
                terminalreporter.write_line(line)
            break
