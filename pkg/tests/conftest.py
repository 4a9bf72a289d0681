import importlib

import pytest

from mmusim import _lru_py

try:
    _lru_c = importlib.import_module("mmusim._lru")
except ImportError:  # extension not built
    _lru_c = None

BACKENDS = [pytest.param(_lru_py, id="python")]
if _lru_c is not None:
    BACKENDS.append(pytest.param(_lru_c, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Each available kernel module in turn."""
    return request.param


_RESULTS_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record ``(number, passed, detail)`` for the end-of-run criterion table."""
    table = request.config.stash.setdefault(_RESULTS_KEY, {})

    def record(number, passed, detail):
        table[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(_RESULTS_KEY, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        passed, detail = table[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
