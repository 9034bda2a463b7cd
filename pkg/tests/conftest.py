"""Shared pytest hooks: surface the acceptance criterion verdicts in the
terminal summary even when stdout capture is on."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria", sep="=")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
