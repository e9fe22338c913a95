"""Shared pytest wiring.

test_acceptance records one (number, line) pair per verification
criterion; the terminal-summary hook below prints them as a compact
PASS/FAIL table at the end of the run.
"""


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
