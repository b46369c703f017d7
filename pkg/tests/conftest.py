"""Collects acceptance outcomes and prints one line per criterion."""

import pytest

_OUTCOMES = {}
_TITLES = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    number, title = marker.args
    _TITLES[number] = title
    if report.when == "call" or report.failed:
        ok = report.passed and not report.failed
        _OUTCOMES[number] = _OUTCOMES.get(number, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        status = "PASS" if _OUTCOMES[number] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {_TITLES[number]}")
