"""End-to-end acceptance criteria, one test and one summary line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the summary lines appear at the
end of the report) or directly as ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import U0, U1, rel, smooth_problem  # noqa: E402
from fraccauchy import (  # noqa: E402
    FractionalOrder,
    MildSolver,
    ProblemData,
    PropagatorRequest,
    integrand_norm_profile,
    make_diagonal,
    make_laplacian_1d,
    make_scalar,
    manufacture_data,
    mild_residual,
    propagator_apply,
)

pytestmark = pytest.mark.acceptance

#: summary lines, printed by the terminal summary hook in conftest
REPORT: list[str] = []


def record(k, ok, detail):
    REPORT.append(f"criterion {k:>4}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def max_rel(a, b):
    return max(rel(x, y) for x, y in zip(a, b))


def diag3():
    return make_diagonal([1.0, 10.0, 100.0])


# {{{ criteria


def criterion_1():
    """Homogeneous new formula against the oracle on diag(1, 10, 100)."""
    op = diag3()
    ts = [0.0, 0.1, 0.5, 1.0]
    start = time.perf_counter()
    worst = 0.0
    for alpha in (0.25, 0.5, 1.0, 1.5, 1.9):
        p = ProblemData(FractionalOrder(alpha), op, U0)
        u = MildSolver("new").fit(p).predict(ts)
        ref = MildSolver("ml_oracle").fit(p).predict(ts)
        worst = max(worst, max_rel(u, ref))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 10.0
    return record(1, ok, f"max rel err {worst:.1e} (<= 1e-8), runtime {elapsed:.2f}s (< 10s)")


def criterion_2():
    """alpha = 1 reproduces the exponential."""
    lam = 3.0
    p = ProblemData(FractionalOrder(1.0), make_scalar(lam), [1.0])
    ts = np.linspace(0.0, 1.0, 11)
    u = MildSolver("new").fit(p).predict(ts)[:, 0]
    err = float(np.max(np.abs(u - np.exp(-lam * ts))))
    return record(2, err <= 1e-10, f"max |u - exp(-lambda t)| = {err:.1e} (<= 1e-10)")


def criterion_3():
    """Exact limits at t = 0 and the small-time size of S_(alpha,2)."""
    op = diag3()
    x = np.array([0.3, -1.7, 2.2])
    exact = True
    for alpha in (0.5, 1.5):
        exact &= np.array_equal(propagator_apply(op, PropagatorRequest(alpha, 1.0, 0.0), x), x)
        exact &= np.array_equal(propagator_apply(op, PropagatorRequest(alpha, 2.0, 0.0), x), np.zeros(3))
    p = ProblemData(FractionalOrder(1.5), op, U0, u1=U1)
    exact &= np.array_equal(MildSolver("new").fit(p).predict([0.0])[0], U0)
    # S_(alpha,2)(t) x ~ t x for small t
    norms = [np.linalg.norm(propagator_apply(op, PropagatorRequest(1.5, 2.0, t), x)) for t in (1e-6, 1e-5, 1e-4)]
    small = norms[0] <= 1e-4 * np.linalg.norm(x)
    ratios = [norms[1] / norms[0], norms[2] / norms[1]]
    trend = all(abs(r - 10) <= 1.0 for r in ratios)
    ok = exact and small and trend
    return record(3, ok, f"bit-exact={exact}, |S_a,2(1e-6)x|/|x| = {norms[0] / np.linalg.norm(x):.1e} (<= 1e-4), "
                         f"decade ratios {ratios[0]:.2f}, {ratios[1]:.2f} (~10)")


def criterion_4():
    """new, classic and li agree pairwise for 1 < alpha < 2."""
    op = diag3()
    ts = [0.1, 0.5, 1.0]
    worst = 0.0
    for alpha in (1.2, 1.5, 1.9):
        p = smooth_problem(op, alpha)
        u = {f: MildSolver(f).fit(p).predict(ts) for f in ("new", "classic", "li")}
        for a, b in (("new", "classic"), ("new", "li"), ("classic", "li")):
            worst = max(worst, max_rel(u[a], u[b]))
    return record(4, worst <= 1e-6, f"max pairwise rel diff {worst:.1e} (<= 1e-6)")


def criterion_5():
    """Volterra residual of every solver at 10 points."""
    op = diag3()
    ts = np.linspace(0.1, 1.0, 10)
    worst, who = 0.0, ""
    for alpha, formulas in ((0.5, ("new", "classic", "ml_oracle")), (1.5, ("new", "classic", "li", "ml_oracle"))):
        p = smooth_problem(op, alpha)
        for f in formulas:
            sol = MildSolver(f).fit(p).solve(ts)
            r = max(mild_residual(p, sol, float(t)) for t in ts)
            if r >= worst:
                worst, who = r, f"{f}, alpha={alpha}"
    return record(5, worst <= 1e-6, f"max residual {worst:.1e} ({who}) (<= 1e-6)")


def criterion_6():
    """Integrand decay slopes at t = 0."""
    op = diag3()
    x = np.array([1.0, -0.5, 0.25])
    radii = 1e4 * np.logspace(0, 3, 7)
    dev = 0.0
    for alpha in (0.4, 0.5, 1.5):
        for beta, expected in ((1.0, -1.0), (2.0, -2.0), (alpha, -alpha)):
            slope = integrand_norm_profile(op, alpha, beta, 0.0, x, 0, radii).slope
            dev = max(dev, abs(slope - expected))
    # corrected integrand: geometric spectrum keeps the rough-data regime visible,
    # coefficients lambda^-(1 + gamma) behave like an element of D(A^(1 + gamma))
    lam = np.geomspace(1.0, 1e16, 161)
    geo = make_diagonal(lam)
    short = math.inf
    for alpha in (0.25, 0.5, 1.5):
        radii = np.logspace(3 / alpha, 8 / alpha, 11)
        for gamma in (0.2, 0.5):
            y = lam ** (-(1 + gamma))
            for beta in (1.0, alpha):
                # the sum over k = 0..1 of the expansion: two subtracted terms
                slope = integrand_norm_profile(geo, alpha, beta, 0.0, y, 2, radii).slope
                short = min(short, -slope - (alpha + beta + alpha * gamma))
    ok = dev <= 0.1 and short >= -0.1
    return record(6, ok, f"max |slope - expected| {dev:.3f} (<= 0.1); "
                         f"min corrected decay minus (m alpha + beta + alpha gamma) {short:+.3f} (>= -0.1)")


def rough_problem():
    op = make_diagonal(np.geomspace(1.0, 1e8, 64))
    x = manufacture_data(op, 0.2, seed=0).vector
    u0 = manufacture_data(op, math.inf, seed=1).vector
    return ProblemData.with_polynomial_rhs(FractionalOrder(0.4), op, u0, [x, 0.5 * x], rhs_regularity=0.2)


def criterion_7():
    """Rough right-hand side: new converges, classic stagnates at the same budget."""
    p = rough_problem()
    ts = [0.1, 0.5, 1.0]
    ref = MildSolver("ml_oracle").fit(p).predict(ts)
    new = MildSolver("new", node_count=256).fit(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        classic = MildSolver("classic", node_count=256).fit(p)
    e_new = max_rel(new.predict(ts), ref)
    e_classic = max_rel(classic.predict(ts), ref)
    r_new = mild_residual(p, new.solve([1.0]), 1.0)
    flagged = "classic-regularity" in classic.warnings_
    ok = e_new <= 1e-6 and e_classic >= 1e-3 and e_new < e_classic and r_new <= 1e-6 and flagged
    return record(7, ok, f"new err {e_new:.1e} (<= 1e-6), residual {r_new:.1e}; classic err {e_classic:.1e} "
                         f"(>= 1e-3, flagged={flagged}) with {classic.corrections_['S_a,a']} subtracted terms")


def node_study(alpha, Ns=(8, 16, 32, 64, 128, 256), ts=(0.1, 0.5, 1.0)):
    """Errors of S_alpha(t) x against a 4N reference, and the fitted log10 slopes."""
    op = diag3()
    x = np.array([1.0, -0.5, 0.25])
    errs = np.zeros((len(Ns), len(ts)))
    for i, N in enumerate(Ns):
        for j, t in enumerate(ts):
            req = PropagatorRequest(alpha, 1.0, t)
            u = propagator_apply(op, req, x, node_count=N)
            ref = propagator_apply(op, req, x, node_count=4 * N)
            errs[i, j] = rel(u, ref)
    slopes = []
    for j in range(len(ts)):
        # points at the roundoff floor carry no slope information
        keep = errs[:, j] > 1e-13
        if keep.sum() >= 2:
            slopes.append(float(np.polyfit(np.array(Ns)[keep], np.log10(errs[keep, j]), 1)[0]))
        else:
            slopes.append(-math.inf)
    return errs, slopes


def criterion_8():
    """Geometric node convergence for alpha <= 1.5."""
    final, steep = 0.0, -math.inf
    for alpha in (0.25, 0.5, 1.0, 1.5):
        errs, slopes = node_study(alpha)
        final = max(final, float(errs[-1].max()))
        steep = max(steep, max(slopes))
    ok = final <= 1e-8 and steep < 0
    return record(8, ok, f"alpha in {{0.25, 0.5, 1, 1.5}}: err at N=256 {final:.1e} (<= 1e-8), "
                         f"largest fitted slope {steep:.3f}/node (< 0)")


def criterion_8_high_order():
    """The same study at alpha = 1.9 (known not to reach 1e-8 by N = 256)."""
    errs, slopes = node_study(1.9)
    final = float(errs[-1].max())
    ok = final <= 1e-8 and max(slopes) < 0
    REPORT.append(f"criterion   8b: {'PASS' if ok else 'FAIL (documented)'}  alpha=1.9: err at N=256 {final:.1e}, "
                  f"slopes {max(slopes):.3f}/node; rays sit near the imaginary axis, see the decisions ledger")
    return ok


def criterion_9():
    """A commutes with S_alpha(t) on the 64-point Laplacian."""
    op = make_laplacian_1d(64)
    x = manufacture_data(op, 1.0, seed=5).vector
    Ax = op.apply(x)
    worst = 0.0
    for alpha in (0.5, 1.5):
        for t in np.linspace(0.1, 1.0, 10):
            req = PropagatorRequest(alpha, 1.0, float(t))
            d = op.apply(propagator_apply(op, req, x)) - propagator_apply(op, req, Ax)
            worst = max(worst, float(np.linalg.norm(d) / np.linalg.norm(Ax)))
    return record(9, worst <= 1e-8, f"max |A S x - S A x| / |A x| = {worst:.1e} (<= 1e-8)")


def criterion_10():
    """Continuity of the solution in alpha at alpha = 1."""
    op = diag3()
    ts = np.linspace(0.1, 1.0, 10)
    base = MildSolver("new").fit(smooth_problem(op, 1.0, u1=False)).predict(ts)
    gaps = {}
    for sign in (1, -1):
        row = []
        for h in (0.1, 0.05, 0.025):
            u = MildSolver("new").fit(smooth_problem(op, 1.0 + sign * h, u1=False)).predict(ts)
            row.append(max(float(np.linalg.norm(a - b)) for a, b in zip(u, base)))
        gaps[sign] = row
    ok = all(r[0] > r[1] > r[2] for r in gaps.values())
    fmt = lambda r: ", ".join(f"{v:.2e}" for v in r)
    return record(10, ok, f"max_t gap for h = 0.1, 0.05, 0.025: 1+h [{fmt(gaps[1])}], 1-h [{fmt(gaps[-1])}] (decreasing)")


# }}}


# {{{ tests


def test_criterion_1_oracle_equivalence():
    assert criterion_1()


def test_criterion_2_integer_order():
    assert criterion_2()


def test_criterion_3_exact_limits():
    assert criterion_3()


def test_criterion_4_cross_formula():
    assert criterion_4()


def test_criterion_5_residuals():
    assert criterion_5()


def test_criterion_6_decay_slopes():
    assert criterion_6()


def test_criterion_7_regularity_dichotomy():
    assert criterion_7()


def test_criterion_8_node_convergence():
    assert criterion_8()


@pytest.mark.xfail(strict=True, reason="alpha=1.9 needs about 512 nodes per branch; see the decisions ledger")
def test_criterion_8_node_convergence_alpha_1_9():
    assert criterion_8_high_order()


def test_criterion_9_commutation():
    assert criterion_9()


def test_criterion_10_alpha_continuity():
    assert criterion_10()


# }}}


if __name__ == "__main__":
    checks = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
              criterion_7, criterion_8, criterion_8_high_order, criterion_9, criterion_10]
    for check in checks:
        check()
        print(REPORT[-1], flush=True)
