r"""Riemann-Liouville integrals, Caputo derivatives and weakly singular rules.

.. math::

    J_\alpha v(t) = \frac{1}{\Gamma(\alpha)} \int_0^t (t - s)^{\alpha - 1} v(s) \,\mathrm{d}s,
    \qquad
    \partial_t^\alpha u(t) = J_{n - \alpha} u^{(n)}(t), \quad n = \lceil \alpha \rceil.

Smooth integrands are handled by a single Gauss-Jacobi rule with the weight
``(t - s)^(alpha - 1)``. Integrands with boundary layers, such as propagators
applied to high modes, use :func:`composite_rule`, which grades panels
geometrically towards the endpoints.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import eval_jacobi, gammaln, roots_jacobi, roots_legendre

from fraccauchy.core import Array

#: step of the central difference fallback
FD_STEP = 1e-5


class ReducedAccuracyWarning(UserWarning):
    """A derivative was approximated numerically."""


# {{{ quadrature rules


@lru_cache(maxsize=128)
def gauss_jacobi(n: int, a: float, b: float) -> tuple[Array, Array]:
    """Nodes and weights on ``[-1, 1]`` for the weight ``(1 - x)^a (1 + x)^b``."""
    if a == 0 and b == 0:
        x, w = roots_legendre(n)
    else:
        x, w = roots_jacobi(n, a, b)
        if n > 1:
            x, w = _polish_jacobi(n, a, b, x)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _polish_jacobi(n: int, a: float, b: float, x: Array) -> tuple[Array, Array]:
    # the eigenvalue nodes lose digits for larger n; two Newton steps on P_n and
    # the closed-form weights restore them
    def dp(x: Array) -> Array:
        return 0.5 * (n + a + b + 1) * eval_jacobi(n - 1, a + 1, b + 1, x)

    for _ in range(2):
        x = x - eval_jacobi(n, a, b, x) / dp(x)
    logc = (gammaln(n + a + 1) + gammaln(n + b + 1) - gammaln(n + a + b + 1)
            - gammaln(n + 1) + (a + b + 1) * math.log(2))
    d = dp(x)
    return x, math.exp(logc) / ((1 - x * x) * d * d)


def jacobi_rule(t: float, exponent: float, n: int) -> tuple[Array, Array]:
    """Rule for ``int_0^t (t - s)^exponent g(s) ds``, returned as nodes and weights."""
    x, w = gauss_jacobi(n, exponent, 0.0)
    return 0.5 * t * (x + 1), (0.5 * t) ** (exponent + 1) * w


@dataclass(frozen=True)
class CompositeRule:
    """Nodes and weights of a panel rule on ``[a, b]``."""

    nodes: Array
    weights: Array


def _graded_breaks(a: float, b: float, left: bool, right: bool, ratio: float, depth: float) -> Array:
    L = b - a
    levels = max(1, math.ceil(math.log(depth) / math.log(ratio)))
    pts = [a, b]
    if left and right:
        half = 0.5 * L
        pts += [a + half * ratio**k for k in range(levels)]
        pts += [b - half * ratio**k for k in range(levels)]
    elif left:
        pts += [a + L * ratio**k for k in range(1, levels + 1)]
    elif right:
        pts += [b - L * ratio**k for k in range(1, levels + 1)]
    return np.unique(np.array(pts))


def _split_long(breaks: Array, max_panel: float | None) -> Array:
    if max_panel is None:
        return breaks
    pts = [breaks[:1]]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        k = max(1, math.ceil((hi - lo) / max_panel))
        pts.append(np.linspace(lo, hi, k + 1)[1:])
    return np.concatenate(pts)


def oscillation_panel(alpha: float, spectral_radius: float, radians: float = 4.0) -> float | None:
    """Longest panel that keeps the fastest mode below *radians* per panel.

    For ``alpha > 1`` the high modes oscillate in time with frequency of order
    ``lambda_max^(1/alpha)``; for ``alpha <= 1`` they do not and ``None`` is
    returned.
    """
    if alpha <= 1:
        return None
    return radians / spectral_radius ** (1 / alpha)


def start_depth(power: float, scale: float, t: float, tol: float = 1e-13) -> float:
    """Relative size of the first panel of a graded rule on ``[0, t]``.

    *power* is the exponent of the first non-smooth term of the weighted
    integrand near the origin, so a panel of width ``h`` there contributes an
    error of order ``scale h^power``; the returned depth keeps it near *tol*.
    """
    h = (tol / max(1.0, scale)) ** (1.0 / power)
    return h / max(t, 1.0)


def composite_rule(
    a: float,
    b: float,
    *,
    left: bool = False,
    right: bool = False,
    right_exponent: float = 0.0,
    left_exponent: float = 0.0,
    panel_nodes: int = 12,
    ratio: float = 0.25,
    depth: float = 1e-14,
    max_panel: float | None = None,
) -> CompositeRule:
    """Rule for ``int_a^b (b - s)^right_exponent (s - a)^left_exponent g(s) ds``.

    Panels are graded geometrically with *ratio* towards the flagged ends, down
    to a relative size *depth*, and panels longer than *max_panel* are split
    uniformly. The end panels carry the algebraic weights
    exactly through Gauss-Jacobi nodes; elsewhere the weights are multiplied in.
    """
    if not b > a:
        return CompositeRule(np.zeros(0), np.zeros(0))
    breaks = _split_long(_graded_breaks(a, b, left, right, ratio, depth), max_panel)
    nodes, weights = [], []
    last = len(breaks) - 2
    for i in range(len(breaks) - 1):
        lo, hi = breaks[i], breaks[i + 1]
        h = hi - lo
        ea = left_exponent if i == 0 else 0.0
        eb = right_exponent if i == last else 0.0
        x, w = gauss_jacobi(panel_nodes, eb, ea)
        s = lo + 0.5 * h * (x + 1)
        wt = (0.5 * h) ** (1 + ea + eb) * w
        if i != 0 and left_exponent != 0:
            wt = wt * (s - a) ** left_exponent
        if i != last and right_exponent != 0:
            wt = wt * (b - s) ** right_exponent
        nodes.append(s)
        weights.append(wt)
    return CompositeRule(np.concatenate(nodes), np.concatenate(weights))


# }}}


# {{{ time functions


@dataclass(frozen=True)
class TimeGrid:
    """Increasing, non-negative output times."""

    points: Array

    def __post_init__(self) -> None:
        p = np.atleast_1d(np.asarray(self.points, dtype=float))
        if p.ndim != 1 or p.size == 0:
            raise ValueError("time grid must be a non-empty 1d array")
        if not np.all(np.isfinite(p)) or p[0] < 0:
            raise ValueError("time grid must be finite and non-negative")
        if np.any(np.diff(p) <= 0):
            raise ValueError("time grid must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.size

    def __iter__(self):
        return iter(self.points)

    @classmethod
    def uniform(cls, T: float, num: int, include_zero: bool = True) -> TimeGrid:
        start = 0.0 if include_zero else T / num
        return cls(np.linspace(start, T, num))


def _eval(v: Callable[[float], Array], s: Array) -> Array:
    return np.array([np.asarray(v(float(si))) for si in np.ravel(s)])


@dataclass(frozen=True)
class SampledFunction:
    """Vector-valued function of time, tabulated and/or given by a handle.

    ``derivatives[k - 1]`` is the ``k``-th derivative handle, if known. Without a
    handle the function is evaluated by cubic spline interpolation of the
    samples.
    """

    grid: TimeGrid | None = None
    values: Array | None = None
    handle: Callable[[float], Array] | None = None
    derivatives: tuple[Callable[[float], Array], ...] = field(default=())

    def __post_init__(self) -> None:
        if self.handle is None and (self.grid is None or self.values is None):
            raise ValueError("need either samples or an analytic handle")
        if self.values is not None:
            vals = np.asarray(self.values)
            if self.grid is None or vals.shape[0] != len(self.grid):
                raise ValueError("number of samples must match the grid")
            if not np.all(np.isfinite(vals)):
                raise ValueError("samples must be finite")
            object.__setattr__(self, "values", vals)

    @classmethod
    def from_handle(cls, f: Callable[[float], Array], *derivatives: Callable[[float], Array]) -> SampledFunction:
        return cls(handle=f, derivatives=tuple(derivatives))

    def __call__(self, s: float) -> Array:
        if self.handle is not None:
            return np.asarray(self.handle(s))
        return self._spline(s)

    def _spline(self, s: float, nu: int = 0) -> Array:
        cs = CubicSpline(self.grid.points, self.values, axis=0)
        return np.asarray(cs(s, nu))

    def has_derivative(self, k: int) -> bool:
        return k == 0 or len(self.derivatives) >= k

    def derivative(self, k: int, allow_fd: bool = True) -> Callable[[float], Array]:
        """Handle for the ``k``-th derivative.

        Missing analytic derivatives are replaced by central differences of the
        handle, or by differentiating a local quartic fit of the samples; both
        emit a :class:`ReducedAccuracyWarning`.
        """
        if k == 0:
            return self
        if len(self.derivatives) >= k:
            return self.derivatives[k - 1]
        if not allow_fd:
            raise ValueError(f"derivative of order {k} is not available")
        warnings.warn(
            f"derivative of order {k} approximated numerically (reduced accuracy)",
            ReducedAccuracyWarning,
            stacklevel=2,
        )
        if self.handle is not None:
            return _central_difference(self.handle, k)
        return _polyfit_derivative(self.grid.points, self.values, k)


def _central_difference(f: Callable[[float], Array], k: int) -> Callable[[float], Array]:
    h = FD_STEP if k == 1 else FD_STEP**0.5

    def df(s: float) -> Array:
        if k == 1:
            return (np.asarray(f(s + h)) - np.asarray(f(s - h))) / (2 * h)
        return (np.asarray(f(s + h)) - 2 * np.asarray(f(s)) + np.asarray(f(s - h))) / h**2

    return df


def _polyfit_derivative(t: Array, values: Array, k: int, order: int = 4) -> Callable[[float], Array]:
    npts = min(len(t), order + 3)
    if npts <= k:
        raise ValueError("too few samples to differentiate")
    deg = min(order, npts - 1)

    def df(s: float) -> Array:
        idx = np.argsort(np.abs(t - s))[:npts]
        tt = t[idx] - s
        coef = np.polynomial.polynomial.polyfit(tt, values[idx], deg)
        return math.factorial(k) * coef[k]

    return df


# }}}


# {{{ operations


def rl_integral(
    alpha: float,
    v: SampledFunction | Callable[[float], Array],
    t: float,
    n: int = 40,
    graded: bool = False,
) -> Array:
    """Riemann-Liouville integral ``J_alpha v(t)``.

    With ``graded=True`` a composite rule graded towards ``s = 0`` is used,
    which suits integrands with an integrable singularity or layer there.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive: got {alpha}")
    if t < 0:
        raise ValueError(f"t must be non-negative: got {t}")
    if t == 0:
        return np.zeros_like(np.asarray(v(0.0)), dtype=float) * 0
    if graded:
        rule = composite_rule(0.0, t, left=True, right_exponent=alpha - 1, panel_nodes=min(n, 16))
        s, w = rule.nodes, rule.weights
    else:
        s, w = jacobi_rule(t, alpha - 1, n)
    vals = _eval(v, s)
    return np.tensordot(w, vals, axes=(0, 0)) / math.gamma(alpha)


def caputo_derivative(
    alpha: float,
    u: SampledFunction,
    t: float,
    allow_fd: bool = True,
    n: int = 40,
) -> Array:
    """Caputo derivative ``J_(n - alpha) u^(n)(t)`` with ``n = ceil(alpha)``."""
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2): got {alpha}")
    if not t > 0:
        raise ValueError(f"t must be positive: got {t}")
    order = 1 if alpha <= 1 else 2
    if order == 2 and not u.has_derivative(2) and u.handle is None:
        raise ValueError("second derivative data is required for alpha > 1")
    du = u.derivative(order, allow_fd=allow_fd)
    if alpha == order:
        return np.asarray(du(t))
    return rl_integral(order - alpha, du, t, n=n, graded=True)


def inversion_identity_check(alpha: float, u: SampledFunction, t: float, n: int = 40) -> float:
    """Norm of ``J_alpha d^alpha u(t) - u(t) + sum_k u^(k)(0) t^k / k!``."""
    order = 1 if alpha <= 1 else 2
    if t == 0:
        return 0.0

    def caputo(s: float) -> Array:
        return caputo_derivative(alpha, u, s, n=n) if s > 0 else 0 * np.asarray(u(0.0))

    lhs = rl_integral(alpha, caputo, t, n=n, graded=True)
    taylor = sum(np.asarray(u.derivative(k)(0.0)) * t**k / math.factorial(k) for k in range(order))
    return float(np.linalg.norm(np.atleast_1d(lhs - np.asarray(u(t)) + taylor)))


def monomial_rl(alpha: float, k: int, t: float) -> float:
    """Closed form ``J_alpha s^k (t) = k! / Gamma(k + 1 + alpha) t^(k + alpha)``."""
    return math.gamma(k + 1) / math.gamma(k + 1 + alpha) * t ** (k + alpha)


# }}}
