import numpy as np
import pytest

from delaylab.model import InitialSegment, catalog_problem


@pytest.fixture
def trig25():
    return catalog_problem("trig", tau=0.25)


def batch_increments(N, M, T=1.0, seed=12345):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((N, M)) * np.sqrt(T / N)


@pytest.fixture
def constant_phi():
    return InitialSegment.constant


ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} [{title}]: {'PASS' if passed else 'FAIL'} -- {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
