import os
import shlex
import shutil

import pytest

from fxbmc import FilterSpec, FixedFormat

Q24 = FixedFormat(2, 4)


def solver_available() -> bool:
    cmd = os.environ.get("FXBMC_SOLVER", "z3 -in")
    return shutil.which(shlex.split(cmd)[0]) is not None


needs_solver = pytest.mark.skipif(not solver_available(), reason="no SMT-LIB solver on PATH")


@pytest.fixture
def single_pole():
    """y(n) = 0.5 y(n-1) + x(n) in <2,4>, inputs in [-1, 1]."""
    return FilterSpec.create(["-0.5"], ["1"], Q24, ("-1", "1"), name="single-pole")


@pytest.fixture
def alternating():
    """y(n) = -0.5 y(n-1) + x(n): zero-input runs oscillate around 0."""
    return FilterSpec.create(["0.5"], ["1"], Q24, ("-1", "1"))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
