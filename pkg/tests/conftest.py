import numpy as np
import pytest

from pwlcodec import mdsim

# desk-scale benchmark shared by the acceptance tests
BENCH_CONFIG = mdsim.SimConfig(n_particles=128, equil_steps=20_000, run_steps=100_000, seed=42)

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture(scope="session")
def benchmark_traj() -> np.ndarray:
    return mdsim.run(BENCH_CONFIG)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _criteria[marker.args[0]] = ("PASS" if report.passed else "FAIL", item.name, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, name, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {name}  {detail}")
