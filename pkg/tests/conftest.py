from __future__ import annotations

import pytest

CRITERIA = {
    1: "oracle equivalence",
    2: "round trip and Parseval",
    3: "default-parameter pipeline and Chan-Vese convergence",
    4: "segmentation accuracy",
    5: "denoise and restore improvement",
    6: "overlap splitting",
    7: "CLI determinism",
    8: "noise estimation",
}

_results: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    report = outcome.get_result()
    # a failed setup counts against the criterion; otherwise only the call phase does
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _results.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        runs = _results.get(n)
        status = "NOT RUN" if runs is None else ("PASS" if all(runs) else "FAIL")
        terminalreporter.write_line(f"criterion {n} ({name}): {status}")
