import acceptance_log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance checks")
    for name in sorted(acceptance_log.RESULTS):
        status = acceptance_log.RESULTS[name]
        terminalreporter.write_line(f"{name}: {status}")
