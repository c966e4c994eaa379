criteria_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if criteria_lines:
        terminalreporter.section("acceptance criteria")
        for line in criteria_lines:
            terminalreporter.write_line(line)
