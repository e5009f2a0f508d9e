import support


def pytest_terminal_summary(terminalreporter):
    if support.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(support.VERDICTS, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
