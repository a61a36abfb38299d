"""Shared pytest wiring.

The acceptance tests record one verdict line per criterion; the hook
below replays them in the terminal summary so they stay visible even
when pytest captures stdout of passing tests.
"""

from __future__ import annotations

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
