import numpy as np
import pytest

from semcf import fixtures
from semcf.graph import build_diagram
from semcf.sem import LinearSEM

# Filled by test_acceptance.py; one line per criterion.
CRITERIA: dict = {}


def record(number: int, title: str, passed: bool, detail: str = ""):
    CRITERIA[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, passed, detail = CRITERIA[n]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {n} [{status}] {title}" + (f": {detail}" if detail else ""))


@pytest.fixture(scope="session")
def m1():
    return fixtures.load("m1")


@pytest.fixture(scope="session")
def m2():
    return fixtures.load("m2")


@pytest.fixture(scope="session")
def m3():
    return fixtures.load("m3")


@pytest.fixture(scope="session")
def m4():
    return fixtures.load("m4")


@pytest.fixture(scope="session")
def chain():
    return LinearSEM(build_diagram(["X", "M", "Y"], [("X", "M", 2.0), ("M", "Y", 3.0), ("X", "Y", 1.0)]))


def within_se(engine_value, mc_value, se, k=4.0, floor=1e-8):
    return abs(engine_value - mc_value) <= k * se + floor


def rng(seed):
    return np.random.default_rng(seed)
