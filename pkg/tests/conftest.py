import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def record(request):
    """Store one acceptance verdict; the session summary prints them in order."""
    def _record(criterion: str, passed: bool, detail: str):
        line = f"{criterion} {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.stash[ACCEPTANCE][criterion] = line
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash[ACCEPTANCE]
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
