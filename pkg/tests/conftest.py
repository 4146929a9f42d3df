import numpy as np
import pytest

from paretoprox.funcspace import Affine, MaxOf, MinOf, NormSqShift, Quadratic, Smooth, VectorFunction

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def sq(c, w=1.0, o=0.0):
    return NormSqShift(np.atleast_1d(np.asarray(c, dtype=float)), w, o)


@pytest.fixture
def x_squared():
    return Smooth(sq([0.0]))


@pytest.fixture
def abs_x():
    return MaxOf([Affine([1.0], 0.0), Affine([-1.0], 0.0)])


@pytest.fixture
def neg_abs_x():
    return MinOf([Affine([1.0], 0.0), Affine([-1.0], 0.0)])


@pytest.fixture
def double_well():
    return MinOf([sq([1.0]), sq([-1.0])])


@pytest.fixture
def two_parabolas():
    return VectorFunction([Smooth(sq([1.0])), Smooth(sq([-1.0]))])


@pytest.fixture
def tilted():
    return Smooth(Quadratic([[1.0]], [0.1], 0.0))
