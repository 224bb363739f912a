from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from rik.measure import HALF_LINE, UNIT, from_cells

settings.register_profile(
    "rik", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("rik")

# (criterion number, title, passed, detail) collected by the acceptance suite
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, passed, detail in sorted(ACCEPTANCE_LINES):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {num:2d}. {title}: {detail}")


@st.composite
def grid_functions(draw, max_log_cells: int = 5, signed: bool = True, half_line: bool | None = None):
    """Step functions on dyadic grids with values on the lattice k/16."""
    k = draw(st.integers(0, max_log_cells))
    n = 2 ** k
    lo = -32 if signed else 0
    vals = draw(st.lists(st.integers(lo, 32), min_size=n, max_size=n))
    on_line = draw(st.booleans()) if half_line is None else half_line
    if on_line:
        return from_cells(np.asarray(vals) / 16.0, 4.0 / n, HALF_LINE)
    return from_cells(np.asarray(vals) / 16.0, 1.0 / n, UNIT)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
