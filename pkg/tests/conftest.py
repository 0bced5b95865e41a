import warnings

import numpy as np
import pytest

from fraccauchy import FractionalOrder, ProblemData, make_diagonal, make_scalar

U0 = np.array([1.0, -0.5, 0.25])
U1 = np.array([0.3, 0.2, -0.1])


@pytest.fixture(scope="session")
def diag3():
    return make_diagonal([1.0, 10.0, 100.0])


@pytest.fixture(scope="session")
def scalar1():
    return make_scalar(1.0)


def smooth_problem(op, alpha, u1=True, T=1.0):
    """diag fixture with a linear-in-time smooth right-hand side."""
    c0 = np.array([1.0, 1.0, 1.0])
    c1 = np.array([0.5, -0.2, 0.1])
    return ProblemData.with_polynomial_rhs(
        FractionalOrder(alpha), op, U0, [c0, c1],
        u1=U1 if (u1 and alpha > 1) else None, T=T, rhs_regularity=float("inf"),
    )


def rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
