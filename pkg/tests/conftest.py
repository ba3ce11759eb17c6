import time
import warnings

import numpy as np
import pytest

from renewal_remainder.gridconv import Grid, expansion_terms
from renewal_remainder.renewal import renewal_grid
from renewal_remainder.tailmodel import LogPareto, Pareto

warnings.filterwarnings("ignore", message=".*TBB.*")

BIG_H = 0.05
BIG_XMAX = 2e4


class Big:
    """One full-size model: G̅, g and the renewal solution on h = 0.05, x_max = 2e4."""

    def __init__(self, model):
        self.model = model
        self.grid = Grid.for_model(model, BIG_H, BIG_XMAX)
        t0 = time.perf_counter()
        (self.g, self.gbar), = expansion_terms(model, self.grid, 2)
        self.gbar_seconds = time.perf_counter() - t0
        self.sol = renewal_grid(model, self.grid, gbar=self.gbar)

    def final_decade(self, n: int = 11) -> np.ndarray:
        xs = np.geomspace(self.grid.x_max / 10, self.grid.x_max, n)
        return np.array([self.grid.index(x) for x in xs])


_cache: dict = {}


def _big(key, factory):
    if key not in _cache:
        _cache[key] = Big(factory())
    return _cache[key]


@pytest.fixture(scope="session")
def big_b025():
    return _big("b025", lambda: Pareto(1.25, 1.0))


@pytest.fixture(scope="session")
def big_b075():
    return _big("b075", lambda: Pareto(1.75, 1.0))


@pytest.fixture(scope="session")
def big_b05():
    return _big("b05", lambda: Pareto(1.5, 1.0))


@pytest.fixture(scope="session")
def big_logpareto():
    return _big("lp", lambda: LogPareto(1.5, np.e, 1.0))


# ---- acceptance reporting: one line per criterion in the terminal summary

_criteria: dict[int, list[tuple[bool, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and not report.failed:
        return
    detail = dict(item.user_properties).get("detail", "")
    if report.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    _criteria.setdefault(marker.args[0], []).append((report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        parts = _criteria[n]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts if d)
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
