import time

import pytest

from vcequilibrium import ModelParams, build_grid, solve_steady_state

CRITERION_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = CRITERION_OUTCOMES.setdefault(number, {"title": title, "ok": True, "ran": False})
    if report.when == "call":
        entry["ran"] = True
    if report.failed or report.skipped:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERION_OUTCOMES):
        entry = CRITERION_OUTCOMES[number]
        verdict = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {entry['title']}")


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def grid101():
    return build_grid()


@pytest.fixture(scope="session")
def benchmark(params, grid101):
    """Free-entry benchmark at the default 101 x 101 resolution, with its wall time."""
    t0 = time.perf_counter()
    state = solve_steady_state(params, grid101)
    return state, time.perf_counter() - t0


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(resolution=31)


@pytest.fixture(scope="session")
def small_benchmark(params, small_grid):
    return solve_steady_state(params, small_grid)
