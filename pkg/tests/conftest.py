import re

_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_(c\d\d)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        key = m.group(1).upper()
        if report.when == "call" or key not in _CRITERIA:
            _CRITERIA[key] = (m.group(2), report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        name, outcome, dur = _CRITERIA[key]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{key} {verdict:4s} {name} ({dur:.1f} s)")
