import functools

import pytest

from spectra.fixtures import load_fixture
from spectra.system import build_system
from spectra.windows import solve_windows


@functools.lru_cache(maxsize=None)
def system(name):
    return build_system(load_fixture(name))


@functools.lru_cache(maxsize=None)
def windows(name):
    return solve_windows(system(name))


@pytest.fixture(scope="session")
def sys_of():
    return system


@pytest.fixture(scope="session")
def win_of():
    return windows


_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
