import pytest

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running experiment")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    if report.failed:
        _CRITERIA[number] = (title, "FAIL")
    elif report.when == "call" and report.passed:
        _CRITERIA.setdefault(number, (title, "PASS"))
    elif report.skipped:
        _CRITERIA[number] = (title, "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {title}")
