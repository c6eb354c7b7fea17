import sys

import numpy as np
import pytest

from bladeas.geometry import load_baseline
from bladeas.parameterization import ParameterSpace
from bladeas.spline import BSplineCurve


def random_curve(rng, degree=3, n_ctrl=10, dim=1):
    """Clamped curve with random interior knots on [0, 1]."""
    interior = np.sort(rng.uniform(0.0, 1.0, n_ctrl - degree - 1))
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    shape = (n_ctrl,) if dim == 1 else (n_ctrl, dim)
    return BSplineCurve(degree, knots, rng.normal(size=shape))


def cox_de_boor(knots, i, p, t):
    """Textbook recursive basis function, right-continuous, closed at the last knot."""
    if p == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        last = knots[-1]
        if t == last and knots[i] < knots[i + 1] == last:
            return 1.0
        return 0.0
    out = 0.0
    d1 = knots[i + p] - knots[i]
    if d1 > 0:
        out += (t - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, t)
    d2 = knots[i + p + 1] - knots[i + 1]
    if d2 > 0:
        out += (knots[i + p + 1] - t) / d2 * cox_de_boor(knots, i + 1, p - 1, t)
    return out


@pytest.fixture(scope="session")
def baseline():
    return load_baseline()


@pytest.fixture(scope="session")
def space(baseline):
    return ParameterSpace.default(baseline, 20)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
