import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hazardbench.dataset import load_bundled  # noqa: E402


@pytest.fixture(scope="session")
def pbc():
    return load_bundled("pbc")


@pytest.fixture(scope="session")
def gbcsg2():
    return load_bundled("gbcsg2")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict line; printed inline and in the terminal summary."""
    def record(label, passed, detail=""):
        verdict = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        line = f"{label}: {verdict}  {detail}".rstrip()
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
