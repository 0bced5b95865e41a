r"""Contour quadrature of the propagators

.. math::

    S_{\alpha,\beta}(t) x = \frac{1}{2\pi i} \int_\Gamma
        e^{zt} z^{\alpha-\beta} (z^\alpha I + A)^{-1} x \,\mathrm{d}z.

The contour consists of two rays ``z = rho e^{+-i theta}``, ``rho in [r, R_max]``,
joined by the arc ``|z| = r``, ``|arg z| <= theta``. The rays use the substitution
``rho = r e^u`` and Gauss-Legendre nodes in ``u``; the arc uses Gauss-Legendre
nodes in the angle. With a correction order ``m > 0`` the first ``m`` terms of the
large-``z`` expansion of the integrand are subtracted and their exact inverse
Laplace transforms are added back, which improves the decay at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import roots_legendre

from fraccauchy.core import Array, SectorialOperator

#: default target accuracy of the quadrature
DEFAULT_TOL = 1e-14

#: upper bound on ``n_nodes * dimension * n_vectors`` per evaluation block
_BLOCK = 1 << 22


#: exponentials below ``e^-40`` are dropped; the corrected integrand is O(1)
#: in the node weights, so such terms sit below double precision
_EXP_FLOOR = -40.0


def exp_outer(z: Array, t: Array) -> Array:
    """``exp(z_j t_k)`` as a matrix, with negligible entries set to zero.

    Far contour nodes have huge imaginary parts; evaluating the complex
    exponential there wastes time on trigonometric argument reduction. The
    times are therefore grouped by powers of two and each group only touches
    the nodes that are live for its smallest time.
    """
    z = np.asarray(z)
    t = np.asarray(t, dtype=float)
    out = np.zeros((z.size, t.size), dtype=complex)
    pos = np.flatnonzero(t > 0)
    out[:, t <= 0] = 1.0
    if pos.size == 0:
        return out
    order = np.argsort(-z.real, kind="stable")
    zr = z.real[order]
    # nodes with Re z > floor / tau, as a prefix length of *order*
    bucket = np.floor(np.log2(t[pos])).astype(int)
    for b in np.unique(bucket):
        cols = pos[bucket == b]
        n = int(np.count_nonzero(zr * t[cols].min() > _EXP_FLOOR))
        if n:
            rows = order[:n]
            out[np.ix_(rows, cols)] = np.exp(np.multiply.outer(z[rows], t[cols]))
    return out


def live_nodes(z: Array, t_min: float) -> Array:
    """Mask of nodes whose exponential is not negligible for some ``t >= t_min``."""
    return z.real * t_min > _EXP_FLOOR


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[Array, Array]:
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


# {{{ contour geometry


@dataclass(frozen=True)
class ContourSpec:
    """Geometry of the rays-plus-arc contour.

    ``ray_angle`` is the argument ``theta`` of the upper ray, so the rays are
    ``-rho e^{-+i(pi - theta)}``; ``node_count`` is the number of nodes per
    branch (each ray and the arc).
    """

    arc_radius: float
    ray_angle: float
    truncation_radius: float
    node_count: int
    arc_node_count: int | None = None

    def __post_init__(self) -> None:
        if not self.arc_radius > 0:
            raise ValueError(f"arc radius must be positive: got {self.arc_radius}")
        if not self.arc_radius < self.truncation_radius:
            raise ValueError(
                f"arc radius {self.arc_radius} must be below the truncation "
                f"radius {self.truncation_radius}"
            )
        if not math.pi / 2 < self.ray_angle < math.pi:
            raise ValueError(f"ray angle must lie in (pi/2, pi): got {self.ray_angle}")
        if self.node_count < 1:
            raise ValueError(f"node count must be positive: got {self.node_count}")

    def check_sector(self, alpha: float, phi_s: float) -> None:
        """Check that ``z^alpha`` stays clear of the sector mirrored to the left.

        The map ``z -> z^alpha`` sends the rays to angles ``+-alpha theta``;
        these must stay below ``pi - phi_s`` so that ``-z^alpha`` never enters
        the spectral sector of ``A``.
        """
        if self.ray_angle <= phi_s:
            raise ValueError("ray angle does not exceed the sector half-angle")
        if alpha * self.ray_angle >= math.pi - phi_s:
            raise ValueError(
                f"mapped ray angle {alpha * self.ray_angle:.4f} reaches the sector "
                f"boundary pi - phi_s = {math.pi - phi_s:.4f}"
            )


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes ``z_j``, tangents ``z'_j`` and positive weights ``w_j``.

    ``sum_j w_j g(z_j) z'_j`` approximates the contour integral of ``g``.
    ``segment`` labels the nodes: 0 for the lower ray, 1 for the arc and 2 for
    the upper ray.
    """

    nodes: Array
    tangents: Array
    weights: Array
    segment: Array
    spec: ContourSpec | None = None
    encloses_origin: bool = True

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, values: Array) -> complex:
        """Apply the rule to samples of the integrand at the nodes."""
        return complex(np.sum(self.weights * self.tangents * values))


def build_contour(spec: ContourSpec) -> QuadratureGrid:
    """Discretize the contour described by *spec*, counter-clockwise."""
    r, theta, N = spec.arc_radius, spec.ray_angle, spec.node_count
    Na = spec.arc_node_count or N
    L = math.log(spec.truncation_radius / r)

    x, w = _legendre(N)
    u = 0.5 * L * (x + 1)
    wu = 0.5 * L * w
    # lower ray runs inwards, from R_max to r
    z_low = r * np.exp(L - u) * np.exp(-1j * theta)
    z_up = r * np.exp(u) * np.exp(1j * theta)

    xa, wa = _legendre(Na)
    s = theta * xa
    z_arc = r * np.exp(1j * s)

    nodes = np.concatenate([z_low, z_arc, z_up])
    tangents = np.concatenate([-z_low, 1j * z_arc, z_up])
    weights = np.concatenate([wu, theta * wa, wu])
    segment = np.concatenate([np.zeros(N, int), np.ones(Na, int), np.full(N, 2)])
    return QuadratureGrid(nodes, tangents, weights, segment, spec=spec)


def default_ray_angle(alpha: float, phi_s: float) -> float:
    """Ray angle used when none is given.

    The mapped rays sit halfway between ``alpha pi / 2`` (where ``e^{zt}`` stops
    decaying) and ``pi - phi_s`` (the sector), capped at ``pi - phi_s - 0.05``.
    """
    lo, hi = alpha * math.pi / 2, math.pi - phi_s
    if lo >= hi:
        raise ValueError(
            f"alpha = {alpha} leaves no admissible contour for phi_s = {phi_s}: "
            "need phi_s < pi (1 - alpha/2)"
        )
    return min(math.pi - phi_s - 0.05, 0.5 * (lo + hi) / alpha)


def default_node_count(alpha: float, ray_angle: float, log_length: float) -> int:
    """Nodes per branch for a contour with ``log(R_max / r) = log_length``.

    The integrand varies on a scale of order ``1 / alpha`` in ``log |z|``, and
    rays close to the imaginary axis damp ``e^{zt}`` slowly, so the count grows
    with ``alpha log_length`` and with ``|tan(theta)|``.
    """
    steep = max(1.0, abs(math.tan(ray_angle)) / 4.5)
    n = 14.0 * alpha * log_length * steep
    return int(min(8192, max(256, 64 * math.ceil(n / 64))))


def default_correction(alpha: float, beta: float, gamma: float | None = None) -> int:
    """Number of subtracted expansion terms used when none is requested.

    After ``m`` terms the integrand decays like
    ``|z|^-(beta + alpha (m - 1) + alpha min(gamma, 1))`` when ``A^(m-1) x`` lies
    in ``D(A^gamma)``. The smallest ``m`` making this absolutely integrable at
    ``t = 0`` is returned; ``beta > 1`` needs none. ``gamma = None`` means
    ``D(A)``. Data less regular than assumed gains nothing from further terms.
    """
    if beta > 1:
        return 0
    g = 1.0 if gamma is None else min(float(gamma), 1.0)
    return max(1, math.floor((1 - beta) / alpha - g) + 2)


def truncation_radius(
    alpha: float,
    decay: float,
    arc_radius: float,
    ray_angle: float,
    spectral_radius: float,
    t_min: float = 0.0,
    tol: float = DEFAULT_TOL,
) -> float:
    """Radius beyond which the ray tails are below *tol* (relatively).

    *decay* is the algebraic decay rate ``p = beta + alpha m`` of the integrand.
    For ``t_min > 0`` the exponential factor ``e^{t Re z}`` also bounds the tail;
    the smaller of the two radii is returned.
    """
    r = arc_radius
    scale = max(r, 2.0 * spectral_radius ** (1.0 / alpha))
    log_r = []
    if decay > 1:
        log_r.append(math.log(scale) + math.log(1.0 / tol) / (decay - 1))
    if t_min > 0:
        reach = (math.log(1.0 / tol) + 5.0) / (t_min * abs(math.cos(ray_angle)))
        log_r.append(math.log(max(reach, 2 * r)))
    if not log_r:
        raise ValueError(
            "integral is not absolutely convergent at t = 0 without corrections"
        )
    return r * math.exp(max(min(log_r) - math.log(r), math.log(2.0)))


def default_contour(
    op: SectorialOperator,
    alpha: float,
    families: Sequence[tuple[float, int]],
    T: float = 1.0,
    t_min: float = 0.0,
    node_count: int | None = None,
    tol: float = DEFAULT_TOL,
    arc_radius: float | None = None,
    ray_angle: float | None = None,
) -> ContourSpec:
    """Contour that serves every ``(beta, m)`` pair in *families*.

    The truncation radius is the largest one required by the families, so a
    single set of resolvent solves can be shared between them.
    """
    phi_s = op.sector.phi_s
    theta = default_ray_angle(alpha, phi_s) if ray_angle is None else ray_angle
    r = max(1.0, 1.0 / T) if arc_radius is None else arc_radius
    R = max(
        truncation_radius(alpha, beta + alpha * m, r, theta, op.spectral_radius, t_min, tol)
        for beta, m in families
    )
    if node_count is None:
        node_count = default_node_count(alpha, theta, math.log(R / r))
    N = node_count
    spec = ContourSpec(r, theta, R, N)
    spec.check_sector(alpha, phi_s)
    return spec


# }}}


# {{{ propagator evaluation


@dataclass(frozen=True)
class PropagatorRequest:
    r"""Selects :math:`S_{\alpha,\beta}(t)` and the number *m* of subtracted terms.

    ``m = None`` picks :func:`default_correction` for the claimed regularity
    ``gamma_hint`` of the vector the propagator is applied to.
    """

    alpha: float
    beta: float
    t: float
    m: int | None = None
    gamma_hint: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0, 2): got {self.alpha}")
        if self.t < 0:
            raise ValueError(f"t must be non-negative: got {self.t}")
        if self.m is not None and self.m < 0:
            raise ValueError(f"correction order must be non-negative: got {self.m}")
        if self.gamma_hint is not None and self.gamma_hint < 0:
            raise ValueError(f"gamma_hint must be non-negative: got {self.gamma_hint}")

    @property
    def corrections(self) -> int:
        if self.m is None:
            return default_correction(self.alpha, self.beta, self.gamma_hint)
        return self.m


def _powers(op: SectorialOperator, x: Array, m: int) -> list[Array]:
    """``[x, A x, ..., A^(m-1) x]`` for a column block *x*."""
    if m == 0:
        return []
    out = [x]
    for _ in range(1, m):
        out.append(op.apply(out[-1]))
    return out


def _integrand(
    z: Array, za: Array, Y: Array, powers: Sequence[Array], alpha: float, beta: float
) -> Array:
    """Corrected integrand without the ``e^{zt}`` factor.

    *Y* holds ``(z^alpha + A)^{-1} x`` with shape ``(n, dim, k)`` and *powers*
    the ``A^j x`` blocks of shape ``(dim, k)``.
    """
    G = (z ** (alpha - beta))[:, None, None] * Y
    for j, P in enumerate(powers):
        c = (-1) ** j * z ** (-alpha * j - beta)
        G = G - c[:, None, None] * P[None, :, :]
    return G


def _add_back(taus: Array, powers: Sequence[Array], alpha: float, beta: float) -> Array:
    """Inverse Laplace transform of the subtracted terms, shape ``(len(taus), dim, k)``."""
    out = 0.0
    for j, P in enumerate(powers):
        e = alpha * j + beta
        c = (-1) ** j * taus ** (e - 1) / math.gamma(e)
        out = out + c[:, None, None] * P[None, :, :]
    return out


def _check_t0(beta: float) -> None:
    if beta < 1:
        raise ValueError(
            f"S_(alpha,{beta})(0) is unbounded for beta < 1: the integral is not "
            "strongly convergent at t = 0"
        )


def _finish(op: SectorialOperator, X: Array, out: Array) -> Array:
    if op.is_real and np.isrealobj(X):
        return out.real
    return out


class ResolventCache:
    """Resolvent solves ``(z_j^alpha + A)^{-1} x`` stored per contour node.

    Evaluating :math:`S_{\\alpha,\\beta}(t) x` for any number of times and any
    ``beta`` then costs one weighted sum over the nodes.
    """

    def __init__(self, op: SectorialOperator, grid: QuadratureGrid, alpha: float, x: Array):
        self.op = op
        self.grid = grid
        self.alpha = float(alpha)
        x = np.asarray(x)
        self.flat = x.ndim == 1
        self.x = x[:, None] if self.flat else x
        z = grid.nodes
        self._za = z**self.alpha
        self.Y = op.resolvent_solve_many(self._za, self.x)
        self._powers: list[Array] = [self.x]

    def powers(self, m: int) -> list[Array]:
        while len(self._powers) < m:
            self._powers.append(self.op.apply(self._powers[-1]))
        return self._powers[:m]

    def evaluate(self, beta: float, taus: Sequence[float] | Array, m: int | None = None) -> Array:
        """Return ``S_{alpha,beta}(tau) x`` for every tau, stacked along axis 0."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        if np.any(taus < 0):
            raise ValueError("times must be non-negative")
        m = default_correction(self.alpha, beta) if m is None else m
        g = self.grid
        powers = self.powers(m) if g.encloses_origin else []
        pos = taus > 0
        out = np.zeros((taus.size,) + self.x.shape, dtype=complex)
        if np.any(pos):
            keep = live_nodes(g.nodes, taus[pos].min())
            z = g.nodes[keep]
            G = _integrand(z, self._za[keep], self.Y[keep], self.powers(m), self.alpha, beta)
            c = (g.weights * g.tangents)[keep] / (2j * np.pi)
            E = c[:, None] * exp_outer(z, taus[pos])
            out[pos] = np.einsum("jt,jdk->tdk", E, G)
            if powers:
                out[pos] += _add_back(taus[pos], powers, self.alpha, beta)
        if not np.all(pos):
            _check_t0(beta)
            if beta == 1:
                out[~pos] = self.x
        out = _finish(self.op, self.x, out)
        return out[..., 0] if self.flat else out


def propagate_pairs(
    op: SectorialOperator,
    alpha: float,
    beta: float,
    taus: Sequence[float] | Array,
    X: Array,
    grid: QuadratureGrid,
    m: int | None = None,
) -> Array:
    """Return ``S_{alpha,beta}(tau_k) x_k`` for paired times and vectors.

    *X* has shape ``(K, dim)``, one vector per time; the result has the same
    shape. Nodes are processed in blocks so memory stays bounded.
    """
    taus = np.asarray(taus, dtype=float)
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != taus.size:
        raise ValueError("need one vector per time")
    if np.any(taus < 0):
        raise ValueError("times must be non-negative")
    m = default_correction(alpha, beta) if m is None else m
    dim = op.dimension
    out = np.zeros((taus.size, dim), dtype=complex)

    zero = taus == 0
    if np.any(zero):
        _check_t0(beta)
        if beta == 1:
            out[zero] = X[zero]
    pos = ~zero
    if np.any(pos):
        tp = taus[pos]
        Xc = X[pos].T  # (dim, K)
        powers = _powers(op, Xc, m)
        keep = live_nodes(grid.nodes, tp.min())
        z = grid.nodes[keep]
        c = (grid.weights * grid.tangents)[keep] / (2j * np.pi)
        step = max(1, _BLOCK // max(1, dim * Xc.shape[1]))
        acc = np.zeros(Xc.shape, dtype=complex)
        for lo in range(0, z.size, step):
            sl = slice(lo, lo + step)
            zs = z[sl]
            za = zs**alpha
            Y = op.resolvent_solve_many(za, Xc)
            G = _integrand(zs, za, Y, powers, alpha, beta)
            E = c[sl, None] * exp_outer(zs, tp)
            acc += np.einsum("jk,jdk->dk", E, G)
        if grid.encloses_origin and powers:
            # add-back for paired vectors: coefficient per column
            for j, P in enumerate(powers):
                e = alpha * j + beta
                acc += (-1) ** j * P * (tp ** (e - 1) / math.gamma(e))[None, :]
        out[pos] = acc.T
    return _finish(op, X, out)


def propagate_weighted_sum(
    op: SectorialOperator,
    alpha: float,
    beta: float,
    taus: Sequence[float] | Array,
    omegas: Sequence[float] | Array,
    X: Array,
    grid: QuadratureGrid,
    m: int | None = None,
) -> Array:
    """Return ``sum_k omega_k S_{alpha,beta}(tau_k) x_k``.

    This is what a time quadrature of a convolution needs. By linearity the
    sum over ``k`` is taken inside the contour integral, so only one resolvent
    solve per contour node is needed, whatever the number of terms.
    """
    taus = np.asarray(taus, dtype=float)
    omegas = np.asarray(omegas)
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != taus.size or omegas.shape != taus.shape:
        raise ValueError("need one weight and one vector per time")
    if np.any(taus < 0):
        raise ValueError("times must be non-negative")
    m = default_correction(alpha, beta) if m is None else m
    WX = omegas[:, None] * X
    out = np.zeros(op.dimension, dtype=complex)

    zero = taus == 0
    if np.any(zero):
        _check_t0(beta)
        if beta == 1:
            out += WX[zero].sum(axis=0)
    pos = ~zero
    if np.any(pos):
        tp, WXp = taus[pos], WX[pos]
        keep = live_nodes(grid.nodes, tp.min())
        z = grid.nodes[keep]
        c = (grid.weights * grid.tangents)[keep] / (2j * np.pi)
        step = max(1, _BLOCK // max(1, tp.size))
        for lo in range(0, z.size, step):
            sl = slice(lo, lo + step)
            zs = z[sl]
            # Phi_j = sum_k omega_k e^{z_j tau_k} x_k, one vector per node
            Phi = exp_outer(zs, tp) @ WXp
            za = zs**alpha
            Y = op.resolvent_solve_rows(za, Phi)
            G = (zs ** (alpha - beta))[:, None] * Y
            P = Phi
            for j in range(m):
                G = G - ((-1) ** j * zs ** (-alpha * j - beta))[:, None] * P
                if j + 1 < m:
                    P = op.apply(P.T).T
            out += c[sl] @ G
        if grid.encloses_origin and m:
            P = WXp.T
            for j in range(m):
                e = alpha * j + beta
                out += (-1) ** j * (P @ (tp ** (e - 1))) / math.gamma(e)
                if j + 1 < m:
                    P = op.apply(P)
    return _finish(op, X, out)


def propagator_apply(
    op: SectorialOperator,
    req: PropagatorRequest,
    x: Array,
    grid: QuadratureGrid | None = None,
    node_count: int | None = None,
) -> Array:
    """Evaluate ``S_{alpha,beta}(t) x`` by contour quadrature.

    At ``t = 0`` no quadrature is done: ``beta = 1`` returns *x* itself and
    ``beta > 1`` the zero vector. Without a *grid* the default contour for the
    request is built.
    """
    x = np.asarray(x)
    m = req.corrections
    if req.t == 0:
        _check_t0(req.beta)
        return x.copy() if req.beta == 1 else np.zeros_like(x)
    if grid is None:
        spec = default_contour(
            op,
            req.alpha,
            [(req.beta, m)],
            T=max(req.t, 1e-300),
            t_min=req.t,
            node_count=node_count,
        )
        grid = build_contour(spec)
    return ResolventCache(op, grid, req.alpha, x).evaluate(req.beta, [req.t], m)[0]


# }}}


# {{{ integrand decay


@dataclass(frozen=True)
class NormProfile:
    """Integrand norms sampled along the upper ray."""

    radii: Array
    norms: Array
    slope: float = field(default=math.nan)


def fit_loglog_slope(radii: Array, norms: Array) -> float:
    """Least-squares slope of ``log(norm)`` against ``log(radius)``."""
    radii = np.asarray(radii, dtype=float)
    norms = np.asarray(norms, dtype=float)
    keep = norms > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive samples to fit a slope")
    return float(np.polyfit(np.log(radii[keep]), np.log(norms[keep]), 1)[0])


def integrand_norm_profile(
    op: SectorialOperator,
    alpha: float,
    beta: float,
    t: float,
    x: Array,
    m: int,
    radii: Sequence[float] | Array,
    ray_angle: float | None = None,
) -> NormProfile:
    """Sample ``||e^{zt} z^(alpha-beta) (z^alpha + A)^{-1} x - correction(z)||``.

    The samples are taken at ``z = radius e^{i theta}`` on the upper ray, where
    ``theta`` defaults to :func:`default_ray_angle`.
    """
    theta = default_ray_angle(alpha, op.sector.phi_s) if ray_angle is None else ray_angle
    radii = np.asarray(radii, dtype=float)
    z = radii * np.exp(1j * theta)
    xc = np.asarray(x)[:, None]
    Y = op.resolvent_solve_many(z**alpha, xc)
    G = _integrand(z, z**alpha, Y, _powers(op, xc, m), alpha, beta)[:, :, 0]
    G = G * np.exp(z * t)[:, None]
    norms = np.array([float(op.norm(g)) for g in G])
    return NormProfile(radii, norms, fit_loglog_slope(radii, norms))


# }}}
