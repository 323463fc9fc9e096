import json
import time
from pathlib import Path

import pytest

from gsc_dw.gsc_core import gen_counterexample, menger_sponge, sierpinski_carpet
from gsc_dw.scaling import resistance_sequence

FIXTURES = Path(__file__).parent / "fixtures" / "v1"

# name -> (spec factory, deepest level used by the acceptance suite)
BUILTINS = {
    "sc": (sierpinski_carpet, 5),
    "menger": (menger_sponge, 3),
    "counterexample:3,2": (lambda: gen_counterexample(3, 2), 2),
}

_acceptance = {}


def load_fixture(name):
    return json.loads((FIXTURES / name).read_text())


class _Reports:
    """Scaling reports computed once per session and shared between tests."""

    def __init__(self):
        self._cache = {}
        self.seconds = {}

    def __call__(self, name):
        if name not in self._cache:
            factory, n_max = BUILTINS[name]
            t = time.perf_counter()
            self._cache[name] = resistance_sequence(factory(), n_max)
            self.seconds[name] = time.perf_counter() - t
        return self._cache[name]


@pytest.fixture(scope="session")
def reports():
    return _Reports()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        ok = rep.passed
        prev = _acceptance.get(number)
        _acceptance[number] = (title, ok and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, ok = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
