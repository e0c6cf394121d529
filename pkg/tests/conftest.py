"""Acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary."""

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "tests": 0, "seconds": 0.0})
    entry["seconds"] += report.duration
    if report.when == "call":
        entry["tests"] += 1
    if report.failed or (report.when == "call" and report.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        status = "PASS" if e["ok"] and e["tests"] else "FAIL"
        terminalreporter.write_line(
            f"{status} criterion {number:>2}: {e['title']} ({e['tests']} checks, {e['seconds']:.1f} s)"
        )
