"""Collects the outcome of tests tagged ``criterion(k)`` and prints one line per criterion."""

from collections import defaultdict

import pytest

N_CRITERIA = 12


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion the test belongs to")
    config._criteria = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    failed = rep.failed
    if rep.when == "call" or (failed and rep.when == "setup"):
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        item.config._criteria[mark.args[0]].append((item.name, rep.passed, detail))


def pytest_terminal_summary(terminalreporter, config):
    results = config._criteria
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        runs = results.get(k)
        if not runs:
            terminalreporter.write_line(f"criterion {k}: NOT RUN")
            continue
        ok = all(passed for _, passed, _ in runs)
        details = " | ".join(d for _, _, d in runs if d)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {details}")
