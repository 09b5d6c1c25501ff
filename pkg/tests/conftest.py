"""Shared test configuration.

geomst must be imported before numba anywhere in the process: its
thread plumbing raises the numba thread cap to at least 8 before numba
reads the environment, which the thread-count reproducibility tests
rely on. Keep it the first import here.
"""

import warnings

import geomst  # noqa: F401  (import order: must precede numba)

import pytest
from numba.core.errors import NumbaWarning

warnings.filterwarnings("ignore", category=NumbaWarning)

_CRITERION_LINES = {}


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL/SKIP line per acceptance criterion.

    ``ok`` is True for PASS, False for FAIL, None for SKIP; the lines
    are printed together in the terminal summary.
    """

    def _record(number: int, ok, detail: str = ""):
        word = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        line = f"criterion {number:02d} {word}"
        if detail:
            line += f": {detail}"
        _CRITERION_LINES[number] = line

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_LINES):
        terminalreporter.write_line(_CRITERION_LINES[number])
