"""Domain types and the operator abstraction.

Every propagator evaluation in the package talks to an operator only through
:class:`SectorialOperator`: ``apply``, ``resolvent_solve`` and, when available,
an eigendecomposition. Concrete fixtures live in :mod:`fraccauchy.operators`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


# {{{ errors


class FractionalCauchyError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(FractionalCauchyError, ValueError):
    """A vector does not match the operator dimension."""


class SingularResolvent(FractionalCauchyError, ArithmeticError):
    """The shifted system ``(wI + A)`` is singular or nearly so."""


class UnsupportedOperator(FractionalCauchyError, TypeError):
    """The operator lacks a capability required by the request."""


class SectorViolation(FractionalCauchyError, ValueError):
    """A sample point or spectral value lies on the wrong side of a sector."""


class AccuracyDomainError(FractionalCauchyError, ValueError):
    """The requested argument lies outside the validated accuracy domain."""


class RegularityRefusal(FractionalCauchyError, ValueError):
    """A representation was refused because the data is not regular enough."""


class NumericalFailure(FractionalCauchyError, RuntimeError):
    """A numerical tolerance could not be met."""


# }}}


# {{{ orders and sectors


@dataclass(frozen=True)
class FractionalOrder:
    """Order of the Caputo derivative, restricted to ``0 < alpha < 2``."""

    alpha: float

    def __post_init__(self) -> None:
        a = float(self.alpha)
        if not (math.isfinite(a) and 0.0 < a < 2.0):
            raise ValueError(f"alpha must lie in (0, 2): got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        """Number of initial conditions, ``ceil(alpha)``."""
        return 1 if self.alpha <= 1.0 else 2


@dataclass(frozen=True)
class SpectralSector:
    r"""The sector :math:`\Sigma(\rho_s, \phi_s) = \{z : |\arg(z - \rho_s)| \le \phi_s\}`
    together with the resolvent constant ``M`` of the bound
    ``||R(z, A)|| <= M / (1 + |z|)`` outside of it.
    """

    rho_s: float
    phi_s: float
    M: float = 1.0

    def __post_init__(self) -> None:
        if not self.rho_s > 0:
            raise ValueError(f"rho_s must be positive: got {self.rho_s}")
        if not 0 < self.phi_s < math.pi / 2:
            raise ValueError(f"phi_s must lie in (0, pi/2): got {self.phi_s}")
        if not self.M > 0:
            raise ValueError(f"M must be positive: got {self.M}")

    def contains(self, z: complex) -> bool:
        """Return *True* if *z* lies in the closed sector."""
        d = complex(z) - self.rho_s
        if d == 0:
            return True
        return abs(math.atan2(d.imag, d.real)) <= self.phi_s


# }}}


# {{{ operator interface


def _as_columns(x: Array, dim: int) -> tuple[Array, bool]:
    """Return *x* as a ``(dim, k)`` array and a flag telling if it was 1d."""
    x = np.asarray(x)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise DimensionMismatch(f"expected length {dim}, got {x.shape[0]}")
        return x[:, None], True
    if x.ndim == 2 and x.shape[0] == dim:
        return x, False
    raise DimensionMismatch(f"expected shape ({dim},) or ({dim}, k), got {x.shape}")


class SectorialOperator(ABC):
    """Abstract finite-dimensional strongly positive operator.

    Subclasses implement :meth:`_apply` and :meth:`_solve_shifted` on column
    blocks of shape ``(dimension, k)``; validation happens here. Instances are
    immutable after construction.
    """

    #: set by subclasses that implement :meth:`eigendecomposition`
    has_eigendecomposition: bool = False

    def __init__(
        self,
        dimension: int,
        sector: SpectralSector,
        weights: Array | None = None,
    ) -> None:
        if dimension < 1:
            raise ValueError(f"dimension must be positive: got {dimension}")
        self.dimension = int(dimension)
        self.sector = sector
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (dimension,) or np.any(weights <= 0):
                raise ValueError("norm weights must be positive and match dimension")
        self.weights = weights

    # -- to implement

    @abstractmethod
    def _apply(self, x: Array) -> Array:
        """Return ``A x`` for a column block."""

    @abstractmethod
    def _solve_shifted(self, w: complex, x: Array) -> Array:
        """Return ``(wI + A)^{-1} x`` for a column block."""

    @property
    @abstractmethod
    def is_real(self) -> bool:
        """*True* if the matrix of the operator is real."""

    @property
    @abstractmethod
    def spectral_radius(self) -> float:
        """Largest modulus of an eigenvalue (or a tight upper bound)."""

    def eigendecomposition(self) -> tuple[Array, Array]:
        """Return eigenvalues and a matrix of eigenvectors (columns)."""
        raise UnsupportedOperator(f"{type(self).__name__} has no eigendecomposition")

    # -- public helpers

    def apply(self, x: Array) -> Array:
        xc, flat = _as_columns(x, self.dimension)
        y = self._apply(xc)
        return y[:, 0] if flat else y

    def resolvent_solve(self, w: complex, x: Array) -> Array:
        xc, flat = _as_columns(x, self.dimension)
        y = self._solve_shifted(complex(w), xc)
        return y[:, 0] if flat else y

    def resolvent_solve_many(self, ws: Array, x: Array) -> Array:
        """Solve ``(w_j I + A) y_j = x`` for many shifts at once.

        *x* has shape ``(dimension, k)`` and the result ``(len(ws), dimension, k)``.
        Subclasses may override this with a vectorized version.
        """
        xc, _ = _as_columns(x, self.dimension)
        return np.stack([self._solve_shifted(complex(w), xc) for w in np.ravel(ws)])

    def resolvent_solve_rows(self, ws: Array, rows: Array) -> Array:
        """Row ``j`` of the result is ``(w_j I + A)^{-1}`` applied to ``rows[j]``."""
        ws = np.ravel(ws)
        return np.stack([self._solve_shifted(complex(w), r[:, None])[:, 0] for w, r in zip(ws, rows)])

    def norm(self, x: Array, axis: int = 0) -> Array:
        """Euclidean norm, or the weighted one when weights were supplied."""
        x = np.asarray(x)
        sq = np.abs(x) ** 2
        if self.weights is not None:
            shape = [1] * x.ndim
            shape[axis] = self.dimension
            sq = sq * self.weights.reshape(shape)
        return np.sqrt(np.sum(sq, axis=axis))


# }}}


# {{{ problem data


TimeFunction = Callable[[float], Array]


def as_state(x: Array | Sequence[complex] | None, dim: int, name: str = "x") -> Array:
    """Validate a state vector and return it as a float or complex array."""
    if x is None:
        return np.zeros(dim)
    x = np.asarray(x)
    if not (np.issubdtype(x.dtype, np.floating) or np.issubdtype(x.dtype, np.complexfloating)):
        x = x.astype(float)
    if x.shape != (dim,):
        raise DimensionMismatch(f"{name}: expected shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name}: entries must be finite")
    return x


@dataclass(frozen=True)
class ProblemData:
    """A fractional Cauchy problem ``d^alpha u + A u = f`` on ``[0, T]``.

    *rhs* and *rhs_derivative* map a time to a state vector; ``None`` stands
    for ``f = 0``. The regularity fields record the largest ``gamma`` for which
    the data is known to lie in ``D(A^gamma)`` (``inf`` when unknown but smooth,
    ``None`` when not claimed).
    """

    order: FractionalOrder
    operator: SectorialOperator
    u0: Array
    u1: Array | None = None
    rhs: TimeFunction | None = None
    rhs_derivative: TimeFunction | None = None
    T: float = 1.0
    rhs_regularity: float | None = None
    polynomial_rhs: tuple[Array, ...] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        dim = self.operator.dimension
        object.__setattr__(self, "u0", as_state(self.u0, dim, "u0"))
        object.__setattr__(self, "u1", as_state(self.u1, dim, "u1"))
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive: got {self.T}")
        if self.order.alpha <= 1.0 and np.any(self.u1 != 0):
            raise ValueError("u1 must vanish when alpha <= 1")
        if self.polynomial_rhs is not None:
            coeffs = tuple(as_state(c, dim, "rhs coefficient") for c in self.polynomial_rhs)
            object.__setattr__(self, "polynomial_rhs", coeffs)

    @property
    def alpha(self) -> float:
        return self.order.alpha

    @property
    def dimension(self) -> int:
        return self.operator.dimension

    @property
    def has_rhs(self) -> bool:
        return self.rhs is not None

    def f(self, t: float) -> Array:
        if self.rhs is None:
            return np.zeros(self.dimension)
        return np.asarray(self.rhs(float(t)))

    def f_many(self, s: Array) -> Array:
        """Right-hand side at many times, shape ``(len(s), dimension)``."""
        s = np.asarray(s, dtype=float)
        if self.rhs is None:
            return np.zeros((s.size, self.dimension))
        if self.polynomial_rhs is not None:
            powers = s[:, None] ** np.arange(len(self.polynomial_rhs))[None, :]
            return powers @ np.array(self.polynomial_rhs)
        return np.array([np.asarray(self.rhs(float(si))) for si in s])

    @classmethod
    def with_polynomial_rhs(
        cls,
        order: FractionalOrder,
        operator: SectorialOperator,
        u0: Array,
        coefficients: Sequence[Array],
        u1: Array | None = None,
        T: float = 1.0,
        rhs_regularity: float | None = None,
    ) -> ProblemData:
        """Build a problem with ``f(t) = sum_k c_k t^k`` and its exact derivative."""
        coeffs = [np.asarray(c) for c in coefficients]

        def rhs(t: float) -> Array:
            return sum((c * t**k for k, c in enumerate(coeffs)), np.zeros_like(coeffs[0]))

        def drhs(t: float) -> Array:
            out = np.zeros_like(coeffs[0])
            for k, c in enumerate(coeffs[1:], start=1):
                out = out + k * c * t ** (k - 1)
            return out

        return cls(
            order=order,
            operator=operator,
            u0=u0,
            u1=u1,
            rhs=rhs,
            rhs_derivative=drhs,
            T=T,
            rhs_regularity=rhs_regularity,
            polynomial_rhs=tuple(coeffs),
        )


# }}}


# {{{ operations


def apply(op: SectorialOperator, x: Array) -> Array:
    """Return ``A x``."""
    return op.apply(x)


def resolvent_solve(op: SectorialOperator, w: complex, x: Array) -> Array:
    """Return ``y`` with ``(wI + A) y = x``."""
    return op.resolvent_solve(w, x)


def fractional_power_apply(op: SectorialOperator, gamma: float, x: Array) -> Array:
    """Return ``A^gamma x`` computed in the eigenbasis of *op*."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative: got {gamma}")
    if gamma == 0:
        return np.asarray(x).copy()
    if gamma == 1:
        return op.apply(x)
    if not op.has_eigendecomposition:
        raise UnsupportedOperator("fractional powers need an eigendecomposition")
    lam, V = op.eigendecomposition()
    xc, flat = _as_columns(x, op.dimension)
    coef = np.linalg.solve(V, xc) if not _is_orthonormal(V) else V.conj().T @ xc
    y = V @ (lam[:, None] ** gamma * coef)
    if op.is_real and np.isrealobj(xc) and np.all(np.isreal(lam)):
        y = y.real
    return y[:, 0] if flat else y


def _is_orthonormal(V: Array) -> bool:
    n = V.shape[1]
    return bool(np.allclose(V.conj().T @ V, np.eye(n), atol=1e-12))


@dataclass(frozen=True)
class SectorReport:
    """Outcome of :func:`check_sector_bound`."""

    max_ratio: float
    argmax: complex
    M: float
    violated: bool


def resolvent_norm(op: SectorialOperator, z: complex) -> float:
    """Spectral norm of ``R(z, A) = (zI - A)^{-1}``."""
    if op.has_eigendecomposition:
        lam, V = op.eigendecomposition()
        if _is_orthonormal(V):
            return float(np.max(1.0 / np.abs(z - lam)))
    if op.dimension <= 512:
        R = op.resolvent_solve(-z, np.eye(op.dimension))
        return float(np.linalg.norm(R, 2))
    raise UnsupportedOperator("resolvent norm needs an eigendecomposition or small dimension")


def check_sector_bound(
    op: SectorialOperator,
    z_samples: Sequence[complex],
    M: float | None = None,
) -> SectorReport:
    """Measure ``max (1 + |z|) ||R(z, A)||`` over samples outside the sector.

    The maximum over unit test vectors is taken exactly through the spectral
    norm of the resolvent. The bound is flagged as violated if the measured
    ratio exceeds *M* (defaults to ``op.sector.M``).
    """
    M = op.sector.M if M is None else M
    best, arg = -np.inf, 0j
    for z in z_samples:
        z = complex(z)
        if op.sector.contains(z):
            raise SectorViolation(f"sample {z} lies inside the sector")
        ratio = (1.0 + abs(z)) * resolvent_norm(op, z)
        if ratio > best:
            best, arg = ratio, z
    return SectorReport(float(best), arg, float(M), bool(best > M * (1 + 1e-12)))


def ray_samples(phi_s: float, num: int = 100) -> Array:
    """Points on rays from the origin at angles beyond *phi_s*.

    Such rays never meet a sector with a positive vertex, so the samples are
    valid input for :func:`check_sector_bound`.
    """
    angles = np.array([2 * phi_s, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi])
    angles = angles[angles > phi_s]
    per_ray = max(1, num // (2 * len(angles)))
    radii = np.logspace(-4, 8, per_ray)
    z = [r * np.exp(s * 1j * a) for a in angles for s in (1, -1) for r in radii]
    z = np.unique(np.round(np.array(z), 15))
    return z[:num] if len(z) > num else z


# }}}
