import numpy as np
import pytest

from lathadapter import geometry

ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` lines for the terminal summary."""

    def record(name, passed, detail=""):
        ACCEPTANCE[name] = (passed, detail)
        print(f"{name}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


@pytest.fixture
def no_clamps():
    before = geometry.clamp_events()
    yield
    assert geometry.clamp_events() == before


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
