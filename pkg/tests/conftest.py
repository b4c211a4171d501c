import math

import pytest

from lortorus import build_profile

PI = math.pi
TWO_PI = 2 * math.pi

_CACHE = {}


def profile(expr: str, period: float):
    """Profiles are immutable, so tests share them."""
    key = (expr, period)
    if key not in _CACHE:
        _CACHE[key] = build_profile(expr, period)
    return _CACHE[key]


@pytest.fixture
def cp():
    return profile("sin(2*x)", PI)


@pytest.fixture
def obstructed():
    return profile("sin(x) + 0.3*sin(2*x)", TWO_PI)


# acceptance criteria report: one PASS/FAIL line per criterion at the end of the run

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


class _Criterion:
    def __init__(self, results, number, title):
        self.results, self.number, self.title = results, number, title

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        status = "PASS" if kind is None else "FAIL"
        line = f"criterion {self.number:>2}: {status}  {self.title}"
        self.results[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion(request):
    results = request.config.stash[_RESULTS]
    return lambda number, title: _Criterion(results, number, title)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
