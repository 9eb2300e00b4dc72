import _cases


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts, one line per criterion, after the run."""
    if not _cases.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_cases.ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
        terminalreporter.write_line(_cases.ACCEPTANCE[key])
