import pytest

_criteria: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = f"criterion {marker.args[0]}: {item.name}"
        _criteria.append((label, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict in _criteria:
        terminalreporter.write_line(f"{verdict}  {label}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
