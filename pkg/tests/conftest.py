import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "rule table: 8 legal flow triples of 50, 42 rejected",
    2: "queue blocking against the hand oracle",
    3: "queue chronology, single customer",
    4: "pki: session with matching keys, none with a wrong key",
    5: "biometric: session with matching trait, none on mismatch",
    6: "otp: seeded password echoed opens a session, others do not",
    7: "determinism: three runs byte-identical",
    8: "round trip and frozen manifests",
    9: "conservation on 100 random models",
    10: "ten single-arc mutations rejected",
}

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or rep.failed:
        _results[n] = _results.get(n, True) and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n in _results:
            status = "PASS" if _results[n] else "FAIL"
        else:
            status = "NOT RUN"
        terminalreporter.write_line(f"criterion {n:2d} {status:7s} {CRITERIA[n]}")
