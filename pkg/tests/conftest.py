"""Shared pytest plumbing.

The acceptance tests append one human-readable pass/fail line per criterion
to ``CRITERION_LINES``; printing them in the terminal summary keeps them
visible even though pytest captures per-test stdout.
"""

CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
