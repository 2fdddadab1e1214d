import numpy as np
import pytest

from epispec.graph import erdos_renyi, toy_graph


@pytest.fixture
def toy():
    return toy_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_connected(rng, n, p=None):
    p = rng.uniform(0.05, 0.6) if p is None else p
    return erdos_renyi(n, p, rng, connected=True)


# -- acceptance report ---------------------------------------------------------

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one summary line for an acceptance criterion, then assert it."""
    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        request.config.stash[_VERDICTS].append(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
