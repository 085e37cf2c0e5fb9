"""Pytest hooks: the acceptance gate reports one line per criterion."""

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _ACCEPTANCE[name] = report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        rep = _ACCEPTANCE[name]
        verdict = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        label = name.replace("test_", "").replace("_", " ")
        terminalreporter.write_line(f"{label}: {verdict} ({rep.duration:.2f}s)")
