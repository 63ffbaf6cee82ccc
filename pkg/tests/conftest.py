from pathlib import Path

import pytest

from plapbranch import config
from plapbranch.localmap import clear_cache
from plapbranch.mesh import build_interval

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


def load_config(name):
    return config.load(CONFIGS / f"{name}.toml")


@pytest.fixture(scope="session")
def unit256():
    return build_interval(0.0, 1.0, 256)


@pytest.fixture(scope="session")
def unit512():
    return build_interval(0.0, 1.0, 512)


@pytest.fixture
def fresh_cache():
    clear_cache()
    yield
    clear_cache()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        ok = rep.passed and not getattr(rep, "wasxfail", False)
        prev = _criteria.get(n, (True, title))[0]
        _criteria[n] = (prev and ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, title = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
