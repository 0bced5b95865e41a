import math
import warnings

import numpy as np
import pytest
from sklearn.base import clone

from conftest import U0, U1, rel, smooth_problem
from fraccauchy import (
    FractionalOrder,
    MildSolver,
    PropagatorRequest,
    ProblemData,
    RegularityRefusal,
    SolutionRecord,
    SolverConfig,
    TimeGrid,
    make_diagonal,
    make_scalar,
    manufacture_data,
    mild_residual,
    ml,
    propagator_apply,
    solve_classic,
    solve_li,
    solve_ml_oracle,
    solve_new,
)
from fraccauchy.fracint import ReducedAccuracyWarning

TS = [0.1, 0.5, 1.0]


def scalar_constant_rhs(alpha, lam=2.0, u0=1.0, c=0.7):
    op = make_scalar(lam)
    return ProblemData.with_polynomial_rhs(FractionalOrder(alpha), op, [u0], [np.array([c])])


def exact_constant_rhs(alpha, t, lam=2.0, u0=1.0, c=0.7):
    z = -lam * t**alpha
    return ml(alpha, 1, z).real * u0 + c * t**alpha * ml(alpha, alpha + 1, z).real


# {{{ new


def test_new_homogeneous_is_propagator(diag3):
    p = ProblemData(FractionalOrder(0.6), diag3, U0)
    u = MildSolver("new").fit(p).predict(TS)
    for t, ut in zip(TS, u):
        ref = propagator_apply(diag3, PropagatorRequest(0.6, 1.0, t), U0)
        assert rel(ut, ref) <= 1e-10


@pytest.mark.parametrize("alpha", [0.3, 0.8, 1.4])
def test_new_constant_rhs_scalar(alpha):
    p = scalar_constant_rhs(alpha)
    u = MildSolver("new").fit(p).predict(TS)
    for t, ut in zip(TS, u):
        assert ut[0] == pytest.approx(exact_constant_rhs(alpha, t), rel=1e-9)


def test_new_zero_time_exact(diag3):
    p = smooth_problem(diag3, 1.5)
    u = MildSolver("new").fit(p).predict([0.0, 0.5])
    assert np.array_equal(u[0], U0)


def test_new_matches_classic_with_velocity(diag3):
    p = smooth_problem(diag3, 1.5)
    a = MildSolver("new").fit(p).predict(TS)
    b = MildSolver("classic").fit(p).predict(TS)
    for x, y in zip(a, b):
        assert rel(x, y) <= 1e-6


def test_new_finite_difference_fallback(diag3):
    c0, c1 = np.ones(3), np.array([0.5, -0.2, 0.1])
    p = ProblemData(FractionalOrder(0.7), diag3, U0, rhs=lambda t: c0 + t * c1, rhs_regularity=math.inf)
    with pytest.warns(ReducedAccuracyWarning):
        s = MildSolver("new").fit(p)
    assert "reduced-accuracy" in s.warnings_
    ref = MildSolver("ml_oracle").fit(p).predict([0.5])[0]
    assert rel(s.predict([0.5])[0], ref) <= 1e-6
    with pytest.raises(ValueError):
        MildSolver("new", allow_fd=False).fit(p)


# }}}


# {{{ classic


def test_classic_homogeneous_equals_new(diag3):
    p = ProblemData(FractionalOrder(1.3), diag3, U0, u1=U1)
    a = MildSolver("new").fit(p).predict(TS)
    b = MildSolver("classic").fit(p).predict(TS)
    for x, y in zip(a, b):
        assert rel(x, y) <= 1e-10


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 1.6])
def test_classic_scalar_matches_oracle(alpha):
    p = scalar_constant_rhs(alpha)
    u = MildSolver("classic").fit(p).predict(TS)
    for t, ut in zip(TS, u):
        assert ut[0] == pytest.approx(exact_constant_rhs(alpha, t), rel=1e-8)


def _rough_problem():
    op = make_diagonal(np.geomspace(1.0, 1e8, 64))
    x = manufacture_data(op, 0.2, seed=0).vector
    u0 = manufacture_data(op, math.inf, seed=1).vector
    return ProblemData.with_polynomial_rhs(FractionalOrder(0.4), op, u0, [x, 0.5 * x], rhs_regularity=0.2)


def test_classic_strict_refusal():
    with pytest.raises(RegularityRefusal, match="delta"):
        MildSolver("classic", strict=True).fit(_rough_problem())


def test_classic_flags_low_regularity():
    with pytest.warns(RuntimeWarning):
        s = MildSolver("classic").fit(_rough_problem())
    assert "classic-regularity" in s.warnings_
    assert s.corrections_["S_a,a"] == 3


def test_classic_accepts_regular_data(diag3):
    s = MildSolver("classic", strict=True).fit(smooth_problem(diag3, 0.4))
    assert s.warnings_ == []


# }}}


# {{{ li and oracle


def test_li_homogeneous_equals_new(diag3):
    p = ProblemData(FractionalOrder(1.5), diag3, U0)
    a = MildSolver("li").fit(p).predict(TS)
    b = MildSolver("new").fit(p).predict(TS)
    for x, y in zip(a, b):
        assert rel(x, y) <= 1e-12


def test_li_full_data_matches_new(diag3):
    p = smooth_problem(diag3, 1.5)
    a = MildSolver("li").fit(p).predict(TS)
    b = MildSolver("new").fit(p).predict(TS)
    for x, y in zip(a, b):
        assert rel(x, y) <= 1e-6


def test_li_rejects_subdiffusion(diag3):
    with pytest.raises(ValueError):
        MildSolver("li").fit(ProblemData(FractionalOrder(0.7), diag3, U0))


def test_oracle_exponential():
    p = ProblemData(FractionalOrder(1.0), make_scalar(1.0), [2.0])
    u = MildSolver("ml_oracle").fit(p).predict(TS)
    np.testing.assert_allclose(u[:, 0], 2 * np.exp(-np.array(TS)), rtol=1e-13)


@pytest.mark.parametrize("alpha", [0.4, 1.7])
def test_oracle_constant_rhs(alpha):
    p = scalar_constant_rhs(alpha, u0=0.0)
    u = MildSolver("ml_oracle").fit(p).predict(TS)
    for t, ut in zip(TS, u):
        assert ut[0] == pytest.approx(0.7 * t**alpha * ml(alpha, alpha + 1, -2.0 * t**alpha).real, rel=1e-11)


def test_oracle_zero_time(diag3):
    p = smooth_problem(diag3, 1.5)
    assert np.array_equal(MildSolver("ml_oracle").fit(p).predict([0.0])[0], U0)


def test_unknown_formula(diag3):
    with pytest.raises(ValueError):
        MildSolver("bogus").fit(ProblemData(FractionalOrder(0.5), diag3, U0))


# }}}


# {{{ residual


def test_residual_oracle_scalar():
    p = scalar_constant_rhs(0.6)
    sol = MildSolver("ml_oracle").fit(p).solve([0.0, 0.5, 1.0])
    assert mild_residual(p, sol, 1.0) <= 1e-7


def test_residual_detects_perturbation():
    p = scalar_constant_rhs(0.6)
    s = MildSolver("ml_oracle").fit(p)
    eps = 1e-3
    shifted = lambda ts: s.predict(ts) + eps
    grid = TimeGrid(np.array([0.0, 0.5, 1.0]))
    sol = SolutionRecord(grid, shifted(grid.points), "ml_oracle", [{}] * 3, evaluator=shifted)
    for t in (0.5, 1.0):
        assert mild_residual(p, sol, t) >= eps / 2


@pytest.mark.parametrize("formula", ["new", "classic", "li", "ml_oracle"])
def test_residual_zero_at_origin(diag3, formula):
    p = smooth_problem(diag3, 1.5)
    sol = MildSolver(formula).fit(p).solve([0.0, 1.0])
    assert mild_residual(p, sol, 0.0) == 0.0


def test_record_residual_diagnostics():
    p = scalar_constant_rhs(0.6)
    sol = MildSolver("new").fit(p).solve([0.0, 0.5, 1.0], residuals=True)
    res = [d["residual"] for d in sol.diagnostics]
    assert all(math.isfinite(r) and r <= 1e-7 for r in res)
    assert sol.diagnostics[0]["correction_order"] == {"S_a,1": 1, "S_a,2": 1}


def test_residual_from_samples_needs_grid():
    p = scalar_constant_rhs(0.6)
    u = MildSolver("ml_oracle").fit(p).predict([0.0, 1.0])
    sol = SolutionRecord(TimeGrid(np.array([0.0, 1.0])), u, "ml_oracle", [{}, {}])
    from fraccauchy.solvers import InsufficientGrid

    with pytest.raises(InsufficientGrid):
        mild_residual(p, sol, 0.5)


# }}}


# {{{ estimator api


def test_estimator_params_and_clone():
    s = MildSolver("classic", node_count=128, correction=2)
    params = s.get_params()
    assert params["formula"] == "classic" and params["node_count"] == 128 and params["correction"] == 2
    c = clone(s)
    assert c.get_params() == params and c is not s
    s.set_params(formula="new")
    assert s.formula == "new"


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        MildSolver().predict([0.5])


def test_functional_interface(diag3):
    p = smooth_problem(diag3, 1.2)
    grid = TimeGrid(np.array([0.0, 0.5]))
    cfg = SolverConfig(node_count=256)
    recs = [f(p, grid, cfg) for f in (solve_new, solve_classic, solve_li, solve_ml_oracle)]
    assert [r.formula_tag for r in recs] == ["new", "classic", "li", "ml_oracle"]
    for r in recs[:-1]:
        assert r.diagnostics[1]["node_count"] == 3 * 256
        assert rel(r.u_values[1], recs[-1].u_values[1]) <= 1e-8


def test_negative_time_rejected(diag3):
    s = MildSolver().fit(ProblemData(FractionalOrder(0.5), diag3, U0))
    with pytest.raises(ValueError):
        s.predict([-0.1])


# }}}
