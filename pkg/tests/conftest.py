import acceptance_report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _number, line in sorted(acceptance_report.RESULTS):
        terminalreporter.write_line(line)
