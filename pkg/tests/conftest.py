import numpy as np
import pytest

from opbound.funcspace import uniform_grid
from opbound.generators import generate_corpus


@pytest.fixture(scope="session")
def grid():
    return uniform_grid()


@pytest.fixture(scope="session")
def standard(grid):
    return {f.label: f for f in generate_corpus("standard", grid)}


@pytest.fixture(scope="session")
def polynomials(grid):
    return generate_corpus("polynomials", grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion (printed in the summary)."""

    def record(number, ok, detail=""):
        ok = bool(ok)
        prev_ok, prev_detail = _ACCEPTANCE.get(number, (True, ""))
        details = [d for d in (prev_detail, detail) if d]
        _ACCEPTANCE[number] = (prev_ok and ok, "; ".join(details))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
