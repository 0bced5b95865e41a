r"""Mild solutions of ``d^alpha u + A u = f`` and the Volterra residual.

Four representations are available:

``new``
    ``u = S_a(t) u0 + S_{a,2}(t) u1 + J_a[S_a(.) f(0)](t) + int_0^t S_a(t-s) J_a f'(s) ds``.
    Only the propagators with ``beta = 1`` and ``beta = 2`` are used, so every
    contour integral converges strongly, also for small arguments.
``classic``
    ``u = S_a(t) u0 + S_{a,2}(t) u1 + int_0^t S_{a,a}(t-s) f(s) ds``.
``li``
    ``u = S_a(t) u0 + S_{a,2}(t) u1 + J_{a-1}[S_a * f](t)``, for ``1 < alpha < 2``.
    The fractional integral is moved inside the convolution, giving
    ``int_0^t S_a(t-s) J_{a-1} f(s) ds``.
``ml_oracle``
    Mode-by-mode evaluation with scalar Mittag-Leffler functions; it needs an
    eigendecomposition and serves as the reference.

:class:`MildSolver` follows the scikit-learn estimator conventions: ``fit``
takes a :class:`~fraccauchy.core.ProblemData` and prepares contours and
resolvent caches, ``predict`` evaluates the solution at given times.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from fraccauchy.contour import (
    QuadratureGrid,
    ResolventCache,
    build_contour,
    default_contour,
    default_correction,
    propagate_weighted_sum,
)
from fraccauchy.core import (
    Array,
    FractionalCauchyError,
    ProblemData,
    RegularityRefusal,
    UnsupportedOperator,
    _is_orthonormal,
)
from fraccauchy.fracint import (
    ReducedAccuracyWarning,
    TimeGrid,
    composite_rule,
    gauss_jacobi,
    oscillation_panel,
    start_depth,
)
from fraccauchy.mittag_leffler import ml_array

FORMULAS = ("new", "classic", "li", "ml_oracle")


class InsufficientGrid(FractionalCauchyError, ValueError):
    """A solution record is too coarse for the residual quadrature."""


# {{{ records


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters shared by the solvers.

    ``node_count`` is the number of contour nodes per branch (``None`` for the
    automatic choice), ``panel_nodes``, ``grading`` and ``depth`` describe the
    graded time quadrature (``depth = None`` sizes the end panels from the
    local behaviour of each integrand), and ``correction`` overrides the number of
    subtracted terms for the ``beta = alpha`` propagator of the classic formula.
    """

    node_count: int | None = None
    tol: float = 1e-14
    panel_nodes: int = 10
    grading: float = 0.25
    depth: float | None = None
    jacobi_nodes: int = 40
    strict: bool = False
    allow_fd: bool = True
    correction: int | None = None

    def params(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SolutionRecord:
    """Solution values on a time grid plus per-point diagnostics."""

    grid: TimeGrid
    u_values: Array
    formula_tag: str
    diagnostics: list[dict]
    evaluator: Callable[[Array], Array] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.u_values.shape[0] != len(self.grid):
            raise ValueError("one solution vector per grid point is required")

    def at(self, t: float) -> Array:
        """Solution at *t*, from the grid if present, otherwise re-evaluated."""
        hit = np.flatnonzero(self.grid.points == t)
        if hit.size:
            return self.u_values[hit[0]]
        if self.evaluator is None:
            raise InsufficientGrid(f"t = {t} is not on the grid and no evaluator is attached")
        return self.evaluator(np.array([t]))[0]


# }}}


# {{{ estimator


class MildSolver(BaseEstimator):
    """Evaluate the mild solution of a fractional Cauchy problem.

    :arg formula: one of ``"new"``, ``"classic"``, ``"li"``, ``"ml_oracle"``.
    :arg strict: refuse the classic formula when the right-hand side lacks the
        regularity its kernel needs, instead of warning.
    """

    def __init__(
        self,
        formula: str = "new",
        node_count: int | None = None,
        tol: float = 1e-14,
        panel_nodes: int = 10,
        grading: float = 0.25,
        depth: float | None = None,
        jacobi_nodes: int = 40,
        strict: bool = False,
        allow_fd: bool = True,
        correction: int | None = None,
    ) -> None:
        self.formula = formula
        self.node_count = node_count
        self.tol = tol
        self.panel_nodes = panel_nodes
        self.grading = grading
        self.depth = depth
        self.jacobi_nodes = jacobi_nodes
        self.strict = strict
        self.allow_fd = allow_fd
        self.correction = correction

    # -- fitting

    def fit(self, problem: ProblemData, y: None = None) -> MildSolver:
        """Validate *problem* and precompute contours and resolvent caches."""
        if self.formula not in FORMULAS:
            raise ValueError(f"unknown formula {self.formula!r}; expected one of {FORMULAS}")
        p = problem
        alpha = p.alpha
        self.problem_ = p
        self.max_panel_ = oscillation_panel(alpha, p.operator.spectral_radius)
        self.warnings_: list[str] = []
        self.corrections_: dict[str, int] = {}

        if self.formula == "li" and not alpha > 1:
            raise ValueError(f"the li representation needs 1 < alpha < 2: got alpha = {alpha}")

        if self.formula == "ml_oracle":
            if not p.operator.has_eigendecomposition:
                raise UnsupportedOperator("the oracle needs an operator with an eigendecomposition")
            lam, V = p.operator.eigendecomposition()
            self.eigenvalues_ = lam
            self.eigenvectors_ = V
            self.orthonormal_ = _is_orthonormal(V)
            self.grid_ = None
            self.node_total_ = 0
            return self

        # one subtracted term at least, so every remainder decays faster than 1/|z|
        families = [(1.0, 1), (2.0, 1)]
        self.corrections_ = {"S_a,1": 1, "S_a,2": 1}
        if self.formula == "classic" and p.has_rhs:
            if self.correction is None:
                # alpha >= 1 needs no term; one still shortens the contour
                m = max(1, default_correction(alpha, alpha, p.rhs_regularity))
            else:
                m = self.correction
            self.corrections_["S_a,a"] = m
            self.classic_m_ = m
            families.append((alpha, m))
            self._check_classic_regularity(p)

        spec = default_contour(
            p.operator, alpha, families, T=p.T, t_min=0.0,
            node_count=self.node_count, tol=self.tol,
        )
        self.contour_ = spec
        self.grid_: QuadratureGrid = build_contour(spec)
        self.node_total_ = len(self.grid_)

        op = p.operator
        self.cache_u0_ = ResolventCache(op, self.grid_, alpha, p.u0)
        self.cache_u1_ = ResolventCache(op, self.grid_, alpha, p.u1) if np.any(p.u1) else None
        self.cache_f0_ = None
        if self.formula == "new" and p.has_rhs:
            f0 = p.f(0.0)
            self.cache_f0_ = ResolventCache(op, self.grid_, alpha, f0) if np.any(f0) else None
            self._df = self._derivative_handle(p)
        return self

    def _check_classic_regularity(self, p: ProblemData) -> None:
        alpha = p.alpha
        if alpha >= 1:
            return
        need = (1 - alpha) / alpha
        have = p.rhs_regularity
        if have is not None and have > need:
            return
        msg = (
            f"classic representation with alpha = {alpha} needs f(t) in D(A^delta) with "
            f"delta > (1 - alpha)/alpha = {need:.4g}; the right-hand side is "
            + ("of unknown regularity" if have is None else f"only in D(A^{have:.4g})")
        )
        if self.strict:
            raise RegularityRefusal(msg)
        self.warnings_.append("classic-regularity")
        warnings.warn(msg, RuntimeWarning, stacklevel=3)

    def _derivative_handle(self, p: ProblemData) -> Callable[[Array], Array]:
        if p.polynomial_rhs is not None:
            coeffs = np.array(p.polynomial_rhs[1:]) if len(p.polynomial_rhs) > 1 else None

            def df(s: Array) -> Array:
                if coeffs is None:
                    return np.zeros((s.size, p.dimension))
                k = np.arange(1, len(coeffs) + 1)
                return (k * s[:, None] ** (k - 1)[None, :]) @ coeffs

            return df
        if p.rhs_derivative is not None:
            return lambda s: np.array([np.asarray(p.rhs_derivative(float(v))) for v in s])
        if not self.allow_fd:
            raise ValueError("the new representation needs f' and numerical differentiation is disabled")
        self.warnings_.append("reduced-accuracy")
        warnings.warn("f' approximated by central differences (reduced accuracy)",
                      ReducedAccuracyWarning, stacklevel=3)
        h = 1e-5

        def df_fd(s: Array) -> Array:
            lo = np.maximum(s - h, 0.0)
            hi = s + h
            return (p.f_many(hi) - p.f_many(lo)) / (hi - lo)[:, None]

        return df_fd

    # -- evaluation

    def predict(self, times: Sequence[float] | Array) -> Array:
        """Solution vectors at *times*, shape ``(len(times), dimension)``."""
        check_is_fitted(self, "problem_")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if np.any(times < 0):
            raise ValueError("times must be non-negative")
        if self.formula == "ml_oracle":
            return self._oracle(times)
        u = self._homogeneous(times)
        if not self.problem_.has_rhs:
            return u
        inhom = {"new": self._new_inhomogeneous, "classic": self._classic_inhomogeneous,
                 "li": self._li_inhomogeneous}[self.formula]
        for i, t in enumerate(times):
            if t > 0:
                u[i] = u[i] + inhom(t)
        return u

    def solve(self, grid: TimeGrid | Sequence[float] | Array, residuals: bool = False) -> SolutionRecord:
        """Evaluate on *grid* and wrap the values in a :class:`SolutionRecord`.

        With ``residuals=True`` the Volterra residual of every point is stored
        in the diagnostics; this costs about a hundred further evaluations per
        point.
        """
        if not isinstance(grid, TimeGrid):
            grid = TimeGrid(np.asarray(grid, dtype=float))
        values = self.predict(grid.points)
        diag = [
            {
                "node_count": self.node_total_,
                "correction_order": dict(self.corrections_),
                "residual": None,
                "warnings": list(self.warnings_),
            }
            for _ in grid.points
        ]
        record = SolutionRecord(grid, values, self.formula, diag, evaluator=self.predict)
        if residuals:
            for d, t in zip(diag, grid.points):
                d["residual"] = mild_residual(self.problem_, record, float(t))
        return record

    def _rule(self, t: float, power: float, **kw) -> tuple[Array, Array]:
        # *power*: the weighted integrand behaves like c + lambda s^power at the graded ends
        depth = self.depth
        if depth is None:
            depth = start_depth(power, self.problem_.operator.spectral_radius, t)
        r = composite_rule(0.0, t, panel_nodes=self.panel_nodes, ratio=self.grading,
                           depth=depth, max_panel=self.max_panel_, **kw)
        return r.nodes, r.weights

    def _homogeneous(self, times: Array) -> Array:
        u = self.cache_u0_.evaluate(1.0, times, m=1)
        if self.cache_u1_ is not None:
            u = u + self.cache_u1_.evaluate(2.0, times, m=1)
        u = np.array(u, dtype=np.result_type(u, float))
        u[times == 0] = self.problem_.u0
        return u

    def _new_inhomogeneous(self, t: float) -> Array:
        p = self.problem_
        alpha = p.alpha
        out = 0.0
        if self.cache_f0_ is not None:
            # J_alpha applied to s -> S_alpha(s) f(0), from cached resolvents
            s, w = self._rule(t, power=1 + alpha, left=True, right_exponent=alpha - 1)
            vals = self.cache_f0_.evaluate(1.0, s, m=1)
            out = out + w @ vals / math.gamma(alpha)
        s, w = self._rule(t, power=1 + alpha, left=True, right=True)
        g = self._rl_of_derivative(s)
        return out + propagate_weighted_sum(p.operator, alpha, 1.0, t - s, w, g, self.grid_, m=1)

    def _rl_of_derivative(self, s: Array) -> Array:
        """``J_alpha f'(s)`` at every node by Gauss-Jacobi quadrature."""
        return self._rl_values(self.problem_.alpha, self._df, s)

    def _rl_values(self, order: float, g: Callable[[Array], Array], s: Array) -> Array:
        """``J_order g(s)`` at every node, for a vectorized smooth *g*."""
        x, w = gauss_jacobi(self.jacobi_nodes, order - 1, 0.0)
        pts = 0.5 * s[:, None] * (x[None, :] + 1)
        vals = g(pts.ravel()).reshape(s.size, x.size, -1)
        scale = (0.5 * s) ** order / math.gamma(order)
        return scale[:, None] * np.einsum("j,ijd->id", w, vals)

    def _classic_inhomogeneous(self, t: float) -> Array:
        p = self.problem_
        alpha = p.alpha
        # the weight tau^(alpha - 1) is carried by the rule
        tau, w = self._rule(t, power=2 * alpha, left=True, left_exponent=alpha - 1)
        F = p.f_many(t - tau)
        return propagate_weighted_sum(
            p.operator, alpha, alpha, tau, w * tau ** (1 - alpha), F, self.grid_, m=self.classic_m_
        )

    def _li_inhomogeneous(self, t: float) -> Array:
        p = self.problem_
        alpha = p.alpha
        # J_(alpha-1) is itself a convolution, so J_(alpha-1)[S_alpha * f] = S_alpha * J_(alpha-1) f
        # J_(alpha-1) f ~ s^(alpha-1) at the left end
        s, w = self._rule(t, power=alpha, left=True, right=True)
        g = self._rl_values(alpha - 1, p.f_many, s)
        return propagate_weighted_sum(p.operator, alpha, 1.0, t - s, w, g, self.grid_, m=1)

    def _oracle(self, times: Array) -> Array:
        p = self.problem_
        alpha = p.alpha
        lam, V = self.eigenvalues_, self.eigenvectors_

        def coeffs(x: Array) -> Array:
            x = np.asarray(x)
            return V.conj().T @ x if self.orthonormal_ else np.linalg.solve(V, x)

        c0 = coeffs(p.u0)
        c1 = coeffs(p.u1)
        poly = None
        if p.polynomial_rhs is not None:
            poly = [coeffs(c) for c in p.polynomial_rhs]
        out = []
        for t in times:
            if t == 0:
                out.append(np.array(p.u0, copy=True))
                continue
            arg = -lam * t**alpha
            v = ml_array(alpha, 1.0, arg) * c0
            if np.any(c1):
                v = v + t * ml_array(alpha, 2.0, arg) * c1
            if p.has_rhs:
                if poly is not None:
                    for k, ck in enumerate(poly):
                        if np.any(ck):
                            e = ml_array(alpha, alpha + k + 1, arg)
                            v = v + math.factorial(k) * t ** (alpha + k) * e * ck
                else:
                    tau, w = self._rule(t, power=2 * alpha, left=True, left_exponent=alpha - 1)
                    F = np.array([coeffs(f) for f in p.f_many(t - tau)])
                    E = np.array([ml_array(alpha, alpha, -lam * s**alpha) for s in tau])
                    v = v + np.einsum("j,jd->d", w, E * F)
            u = V @ v
            if p.operator.is_real and np.isrealobj(np.asarray(u).real) and np.all(np.isreal(lam)):
                u = np.real_if_close(u, tol=1e6)
                u = u.real if np.iscomplexobj(u) else u
            out.append(u)
        return np.array(out)


# }}}


# {{{ functional interface


def _solve(formula: str, p: ProblemData, grid, cfg: SolverConfig | None) -> SolutionRecord:
    cfg = SolverConfig() if cfg is None else cfg
    return MildSolver(formula=formula, **cfg.params()).fit(p).solve(grid)


def solve_new(p: ProblemData, grid, cfg: SolverConfig | None = None) -> SolutionRecord:
    """Solution through the representation that only uses ``S_a`` and ``S_{a,2}``."""
    return _solve("new", p, grid, cfg)


def solve_classic(p: ProblemData, grid, cfg: SolverConfig | None = None) -> SolutionRecord:
    """Solution through the convolution with the ``S_{a,a}`` kernel."""
    return _solve("classic", p, grid, cfg)


def solve_li(p: ProblemData, grid, cfg: SolverConfig | None = None) -> SolutionRecord:
    """Solution through ``J_{a-1}(S_a * f)``; requires ``1 < alpha < 2``."""
    return _solve("li", p, grid, cfg)


def solve_ml_oracle(p: ProblemData, grid, cfg: SolverConfig | None = None) -> SolutionRecord:
    """Reference solution from scalar Mittag-Leffler functions per eigenmode."""
    return _solve("ml_oracle", p, grid, cfg)


def mild_residual(
    p: ProblemData,
    sol: SolutionRecord,
    t: float,
    panel_nodes: int = 10,
    grading: float = 0.25,
    depth: float = 1e-6,
) -> float:
    """Relative residual of the Volterra form of the problem at time *t*.

    Returns ``||u(t) - u0 - t u1 + J_alpha(A u - f)(t)|| / max(1, ||u(t)||)``.
    The integrand ``A u - f`` is bounded near ``s = 0``, so a moderate grading
    *depth* suffices. The integral needs ``u`` inside ``(0, t)``; it is re-evaluated through the
    record's evaluator, or interpolated from the grid when there is none.
    """
    alpha = p.alpha
    op = p.operator
    ut = sol.at(t)
    if t == 0:
        return float(op.norm(ut - p.u0))
    rule = composite_rule(0.0, t, left=True, right_exponent=alpha - 1, panel_nodes=panel_nodes,
                          ratio=grading, depth=depth,
                          max_panel=oscillation_panel(alpha, op.spectral_radius))
    s, w = rule.nodes, rule.weights
    if sol.evaluator is not None:
        us = sol.evaluator(s)
    else:
        pts = sol.grid.points
        if pts.size < 8 or pts[0] > 0 or pts[-1] < t:
            raise InsufficientGrid("need at least 8 grid points covering [0, t]")
        from scipy.interpolate import CubicSpline

        us = CubicSpline(pts, sol.u_values, axis=0)(s)
    integrand = op.apply(us.T).T - p.f_many(s)
    conv = w @ integrand / math.gamma(alpha)
    r = ut - p.u0 - t * p.u1 + conv
    return float(op.norm(r) / max(1.0, float(op.norm(ut))))


# }}}
