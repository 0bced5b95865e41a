"""Concrete operator fixtures with known spectra.

:class:`DiagonalOperator` gives exact resolvents and powers, :class:`Laplacian1D`
is the Dirichlet finite-difference Laplacian on ``(0, 1)`` with banded solves,
and :class:`DenseOperator` wraps an arbitrary matrix with LU solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from fraccauchy.core import (
    Array,
    SectorialOperator,
    SectorViolation,
    SingularResolvent,
    SpectralSector,
    UnsupportedOperator,
    check_sector_bound,
    ray_samples,
)

#: half-angle declared for fixtures with (nearly) real spectra
DEFAULT_PHI_S = 0.05

#: relative size of ``|w + lambda|`` below which a shift is treated as singular
_SINGULAR_RTOL = 1e-14


def _declare_sector(lam: Array, phi_s: float) -> float:
    """Largest vertex ``rho_s`` for which all *lam* lie in the sector."""
    rho = np.min(lam.real - np.abs(lam.imag) / math.tan(phi_s))
    if not rho > 0:
        raise SectorViolation(
            f"eigenvalues do not fit a sector with positive vertex and half-angle {phi_s}"
        )
    return float(rho)


def _measured_sector(op: SectorialOperator, rho_s: float, phi_s: float) -> SpectralSector:
    """Sector whose constant ``M`` is measured on the standard ray sample."""
    probe = SpectralSector(rho_s, phi_s, 1.0)
    op.sector = probe
    report = check_sector_bound(op, ray_samples(phi_s), M=math.inf)
    return SpectralSector(rho_s, phi_s, report.max_ratio)


# {{{ diagonal


class DiagonalOperator(SectorialOperator):
    """Diagonal matrix ``diag(lambda_1, ..., lambda_n)``."""

    has_eigendecomposition = True

    def __init__(
        self,
        eigenvalues: Sequence[complex] | Array,
        phi_s: float = DEFAULT_PHI_S,
        M: float | None = None,
        weights: Array | None = None,
    ) -> None:
        lam = np.asarray(eigenvalues)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1d sequence")
        if not np.all(np.isfinite(lam)):
            raise ValueError("eigenvalues must be finite")
        if np.all(np.isreal(lam)):
            lam = lam.real.astype(float)
        self.eigenvalues = lam
        rho_s = _declare_sector(lam.astype(complex), phi_s)
        super().__init__(lam.size, SpectralSector(rho_s, phi_s, 1.0), weights)
        if M is None:
            self.sector = _measured_sector(self, rho_s, phi_s)
        else:
            self.sector = SpectralSector(rho_s, phi_s, M)

    @property
    def is_real(self) -> bool:
        return bool(np.isrealobj(self.eigenvalues))

    @cached_property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def _apply(self, x: Array) -> Array:
        return self.eigenvalues[:, None] * x

    def _check_shifts(self, d: Array, ws: Array) -> None:
        scale = np.abs(ws)[..., None] + np.abs(self.eigenvalues)
        if np.any(np.abs(d) <= _SINGULAR_RTOL * scale):
            raise SingularResolvent("shift coincides with an eigenvalue of -A")

    def _solve_shifted(self, w: complex, x: Array) -> Array:
        d = w + self.eigenvalues
        self._check_shifts(d, np.asarray(w))
        return x / d[:, None]

    def resolvent_solve_many(self, ws: Array, x: Array) -> Array:
        ws = np.ravel(np.asarray(ws, dtype=complex))
        xc = np.asarray(x)
        if xc.ndim == 1:
            xc = xc[:, None]
        d = ws[:, None] + self.eigenvalues[None, :]
        self._check_shifts(d, ws)
        return xc[None, :, :] / d[:, :, None]

    def resolvent_solve_rows(self, ws: Array, rows: Array) -> Array:
        ws = np.ravel(np.asarray(ws, dtype=complex))
        d = ws[:, None] + self.eigenvalues[None, :]
        self._check_shifts(d, ws)
        return rows / d

    def eigendecomposition(self) -> tuple[Array, Array]:
        return self.eigenvalues, np.eye(self.dimension)


def make_diagonal(
    eigenvalues: Sequence[complex] | Array,
    phi_s: float = DEFAULT_PHI_S,
    M: float | None = None,
) -> DiagonalOperator:
    """Diagonal fixture; ``rho_s`` is derived from the spectrum and ``M`` measured."""
    return DiagonalOperator(eigenvalues, phi_s=phi_s, M=M)


def make_scalar(lam: float, phi_s: float = DEFAULT_PHI_S) -> DiagonalOperator:
    """The 1x1 operator ``lam``."""
    return DiagonalOperator([lam], phi_s=phi_s)


# }}}


# {{{ 1d laplacian


class Laplacian1D(SectorialOperator):
    """Second-order finite differences for ``-u''`` on ``(0, 1)``, Dirichlet ends."""

    has_eigendecomposition = True

    def __init__(self, n: int, phi_s: float = DEFAULT_PHI_S) -> None:
        if n < 1:
            raise ValueError(f"n must be positive: got {n}")
        self.n = int(n)
        self.h = 1.0 / (n + 1)
        lam1 = self.eigenvalues[0]
        super().__init__(n, SpectralSector(lam1, phi_s, 1.0))
        self.sector = _measured_sector(self, lam1, phi_s)

    @property
    def is_real(self) -> bool:
        return True

    @cached_property
    def eigenvalues(self) -> Array:
        k = np.arange(1, self.n + 1)
        return 4.0 / self.h**2 * np.sin(k * np.pi * self.h / 2) ** 2

    @cached_property
    def spectral_radius(self) -> float:
        return float(self.eigenvalues[-1])

    @cached_property
    def modes(self) -> Array:
        """Orthonormal sine modes, one per column."""
        j = np.arange(1, self.n + 1)
        return math.sqrt(2 * self.h) * np.sin(np.outer(j, j) * np.pi * self.h)

    def matrix(self) -> Array:
        c = 1.0 / self.h**2
        return c * (2 * np.eye(self.n) - np.eye(self.n, k=1) - np.eye(self.n, k=-1))

    def _apply(self, x: Array) -> Array:
        c = 1.0 / self.h**2
        y = 2 * c * x
        y[1:] -= c * x[:-1]
        y[:-1] -= c * x[1:]
        return y

    def _solve_shifted(self, w: complex, x: Array) -> Array:
        c = 1.0 / self.h**2
        ab = np.empty((3, self.n), dtype=complex)
        ab[0, :] = -c
        ab[1, :] = 2 * c + w
        ab[2, :] = -c
        if np.min(np.abs(w + self.eigenvalues)) <= _SINGULAR_RTOL * (abs(w) + self.spectral_radius):
            raise SingularResolvent("shift coincides with an eigenvalue of -A")
        return sla.solve_banded((1, 1), ab, x, check_finite=False)

    def eigendecomposition(self) -> tuple[Array, Array]:
        return self.eigenvalues, self.modes


def make_laplacian_1d(n: int, phi_s: float = DEFAULT_PHI_S) -> Laplacian1D:
    """Dirichlet Laplacian with *n* interior points."""
    return Laplacian1D(n, phi_s=phi_s)


# }}}


# {{{ dense


class DenseOperator(SectorialOperator):
    """General matrix with LU-based shifted solves.

    The sector must be supplied, since it cannot be read off a general matrix
    cheaply. Hermitian matrices expose an eigendecomposition.
    """

    def __init__(self, matrix: Array, sector: SpectralSector) -> None:
        A = np.asarray(matrix)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        super().__init__(A.shape[0], sector)
        self.A = A
        self.has_eigendecomposition = bool(np.allclose(A, A.conj().T))

    @property
    def is_real(self) -> bool:
        return bool(np.isrealobj(self.A))

    @cached_property
    def _eig(self) -> tuple[Array, Array]:
        return np.linalg.eigh(self.A)

    @cached_property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def _apply(self, x: Array) -> Array:
        return self.A @ x

    def _solve_shifted(self, w: complex, x: Array) -> Array:
        B = self.A + w * np.eye(self.dimension)
        try:
            lu = sla.lu_factor(B, check_finite=False)
        except (sla.LinAlgError, ValueError) as exc:
            raise SingularResolvent(str(exc)) from exc
        if np.min(np.abs(np.diag(lu[0]))) <= _SINGULAR_RTOL * np.max(np.abs(B)):
            raise SingularResolvent("shifted matrix is numerically singular")
        return sla.lu_solve(lu, x, check_finite=False)

    def eigendecomposition(self) -> tuple[Array, Array]:
        if not self.has_eigendecomposition:
            raise UnsupportedOperator("only Hermitian dense operators are diagonalized")
        return self._eig


# }}}


# {{{ data manufacture


@dataclass(frozen=True)
class ManufacturedData:
    """A normalized vector with eigen-coefficients ``~ lambda^(-gamma - 1/2 - eps)``."""

    vector: Array
    regularity: float
    eps: float
    seed: int


def manufacture_data(
    op: SectorialOperator,
    regularity: float,
    seed: int = 0,
    eps: float = 0.05,
    low_modes: int = 3,
) -> ManufacturedData:
    """Build a unit vector of prescribed regularity class.

    The coefficient of the eigenvector ``v_i`` is ``s_i lambda_i^(-gamma-1/2-eps)``
    with random factors ``s_i`` in ``[0.5, 1.5]`` of random sign. For spectra
    growing linearly in the mode index this places the vector in ``D(A^gamma)``
    but not in ``D(A^(gamma + 2 eps))``. An infinite *regularity* keeps only the
    *low_modes* smallest eigenvalues.
    """
    if not op.has_eigendecomposition:
        raise UnsupportedOperator("manufacture_data needs an eigendecomposition")
    lam, V = op.eigendecomposition()
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.5, 1.5, lam.size) * rng.choice([-1.0, 1.0], lam.size)
    if math.isinf(regularity):
        c = np.zeros(lam.size)
        keep = np.argsort(np.abs(lam))[:low_modes]
        c[keep] = s[keep]
    else:
        c = s * np.abs(lam) ** (-regularity - 0.5 - eps)
    x = V @ c
    if op.is_real:
        x = np.real(x)
    x = x / op.norm(x)
    return ManufacturedData(x, float(regularity), float(eps), int(seed))


# }}}
