import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from frac_boussinesq.initial_data import random_field
from frac_boussinesq.spectral import Grid

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rough_field(grid, seed, slope=1.0):
    """Random real field with a slowly decaying spectrum."""
    return random_field(grid, seed, slope=slope)


# --- acceptance summary: one pass/fail line per criterion ---------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    if rep.failed or (rep.when == "call" and number not in _ACCEPTANCE):
        detail = dict(item.user_properties).get("measured", "")
        _ACCEPTANCE[number] = (title, "FAIL" if rep.failed else "PASS", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[number]
        line = f"[{verdict}] {number:2d}. {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
