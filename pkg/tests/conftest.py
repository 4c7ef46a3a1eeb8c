import numpy as np
import pytest

from qpjacobi.models import almost_mathieu, random_model

_LINES = pytest.StashKey[list]()


@pytest.fixture
def am3():
    return almost_mathieu(3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def random_pair(rng):
    return random_model(rng, K=3, b_shift=1.5)


@pytest.fixture
def verdict(request):
    """``verdict(k, ok, detail)`` prints one criterion line and fails the test if not ``ok``."""
    lines = request.config.stash.setdefault(_LINES, [])
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(k, ok, detail):
        line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
