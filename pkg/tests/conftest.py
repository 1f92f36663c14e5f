import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Record a one-line verdict for an acceptance criterion.

    The test calls ``acceptance(criterion, detail)`` before asserting; the
    verdict is taken from the test outcome, so a failing assertion is
    reported as FAIL with the same detail line.
    """
    entry = {"nodeid": request.node.nodeid, "criterion": None, "detail": ""}

    def record(criterion, detail=""):
        entry["criterion"] = criterion
        entry["detail"] = detail

    _ACCEPTANCE.append(entry)
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" or (report.when == "setup" and report.failed):
        for entry in _ACCEPTANCE:
            if entry["nodeid"] == item.nodeid:
                entry["passed"] = report.passed


def pytest_terminal_summary(terminalreporter):
    rows = [e for e in _ACCEPTANCE if e["criterion"] is not None]
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for e in sorted(rows, key=lambda e: e["criterion"]):
        verdict = "PASS" if e.get("passed") else "FAIL"
        terminalreporter.write_line(f"AC{e['criterion']:>2} {verdict}  {e['detail']}")
