"""Shared test plumbing: acceptance criteria report emitted after the run."""

_criteria = []


def record_criterion(name, passed):
    """Log one acceptance criterion outcome; echoed in the terminal summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] {name}"
    _criteria.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for line in _criteria:
        terminalreporter.write_line(line)
