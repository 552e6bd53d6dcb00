import numpy as np
import pytest

from melpath.model import KParameter, line_problem
from melpath.solver import shoot


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile the numba kernels once so timed tests measure solves only."""
    shoot(line_problem(), KParameter([0.5], 0, 1), steps=10, tol=1e-6)
    from melpath import catenary as cat

    cfg = cat.CatenaryConfig()
    cat.lambda_exact(cfg, cat.PhasePoint(1.0, 1.0))
    cat.time1_map(cfg, cat.PhasePoint(1.0, 1.0), steps=10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(number, title, ok, detail):
        line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
