"""Acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = {}
_NOTES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(code, title): acceptance criterion identifier")


@pytest.fixture
def report(request):
    """``report("text")`` attaches a line to the criterion being run."""
    marker = request.node.get_closest_marker("criterion")
    code = marker.args[0] if marker else request.node.name

    def note(text):
        _NOTES.setdefault(code, []).append(str(text))

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    code, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _RESULTS[code] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for code in sorted(_RESULTS):
        title, status = _RESULTS[code]
        tr.write_line(f"{status} {code}: {title}")
        for line in _NOTES.get(code, []):
            tr.write_line(f"      {line}")
