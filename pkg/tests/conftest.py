import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def midpoint_1d(g, a, b, m=1_000_000):
    """Plain midpoint rule, independent of the package's lattice code."""
    h = (b - a) / m
    t = a + (np.arange(m) + 0.5) * h
    return float(np.sum(g(t)) * h)


_CRITERIA = pytest.StashKey()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    lines = request.config.stash.setdefault(_CRITERIA, {})

    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
