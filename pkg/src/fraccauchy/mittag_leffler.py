r"""Two-parameter Mittag-Leffler function :math:`E_{\alpha,\beta}(z)`.

The function is evaluated in one of three regimes, selected by the size of
:math:`X = |z|^{1/\alpha}`, which controls the largest term of the power series
(roughly :math:`e^X`):

* ``X <= 4``: the power series summed in double precision with
  :func:`math.fsum`.
* ``4 < X < 45``: the power series in multiprecision arithmetic, with enough
  extra digits to absorb the cancellation between terms.
* ``X >= 45`` and ``z`` within ``0.1`` radians of the negative real axis: the
  asymptotic expansion, i.e. the exponentially small saddle contributions plus
  the algebraic series :math:`-\sum_k z^{-k} / \Gamma(\beta - \alpha k)`,
  truncated at its smallest term.

Any other argument raises :class:`~fraccauchy.core.AccuracyDomainError`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import rgamma

from fraccauchy.core import AccuracyDomainError, Array

#: below this value of ``|z|^(1/alpha)`` the series is summed in double precision
SERIES_DOUBLE_LIMIT = 4.0
#: at and above this value the asymptotic expansion is used
ASYMPTOTIC_LIMIT = 45.0
#: half-width of the angular window around the negative axis for the expansion
ASYMPTOTIC_ANGLE = 0.1


@dataclass(frozen=True)
class MLParams:
    """Arguments of :func:`ml`."""

    alpha: float
    beta: float
    z: complex

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive: got {self.alpha}")


def _series_double(alpha: float, beta: float, z: complex) -> complex:
    x = abs(z)
    terms_re, terms_im = [], []
    zk = 1.0 + 0j
    k = 0
    while True:
        g = alpha * k + beta
        t = zk * rgamma(g)
        terms_re.append(t.real)
        terms_im.append(t.imag)
        # log of |z|^k / Gamma(alpha k + beta) once the terms are past their peak
        if g > 1 and k * math.log(x if x > 0 else 1e-300) - math.lgamma(g) < -40 * math.log(10):
            break
        if x == 0:
            break
        k += 1
        zk = zk * z
        if k > 10000:  # pragma: no cover - the bound above always triggers
            break
    return complex(math.fsum(terms_re), math.fsum(terms_im))


#: working precision of the multiprecision series, enough for ``X < 45``
_MP_DPS = 60
_RGAMMA_TABLES: dict[tuple[float, float], list] = {}


def _rgamma_table(alpha: float, beta: float, size: int) -> list:
    """Cached ``1 / Gamma(alpha k + beta)`` for ``k < size`` at :data:`_MP_DPS`."""
    table = _RGAMMA_TABLES.setdefault((alpha, beta), [])
    if len(table) < size:
        with mpmath.workdps(_MP_DPS):
            a, b = mpmath.mpf(alpha), mpmath.mpf(beta)
            table.extend(mpmath.rgamma(a * k + b) for k in range(len(table), size))
    return table


def series_terms(alpha: float, beta: float, z: complex) -> int:
    """Number of terms until ``|z|^k / Gamma(alpha k + beta) < 10^-(dps + 5)``."""
    logx = math.log(abs(z))
    cutoff = -(_MP_DPS + 5) * math.log(10)
    K = 1
    while not (alpha * K + beta > 1 and K * logx - math.lgamma(alpha * K + beta) < cutoff):
        K += 1
    return K


def _series_mp(alpha: float, beta: float, z: complex, terms: int | None = None) -> complex:
    K = series_terms(alpha, beta, z) if terms is None else terms
    table = _rgamma_table(alpha, beta, K + 1)
    with mpmath.workdps(_MP_DPS):
        zz = mpmath.mpf(z.real) if z.imag == 0 else mpmath.mpc(z)
        total = table[K]
        for k in range(K - 1, -1, -1):
            total = total * zz + table[k]
        return complex(total)


def _asymptotic(alpha: float, beta: float, z: complex, X: float) -> complex:
    argz = cmath.phase(z)
    out = 0j
    for j in (-1, 0, 1):
        ang = (argz + 2 * math.pi * j) / alpha
        if -math.pi < ang <= math.pi:
            zeta = X * cmath.exp(1j * ang)
            out += zeta ** (1 - beta) * cmath.exp(zeta) / alpha

    # optimal truncation at the minimum of the smooth envelope
    # Gamma(alpha k - beta + 1) / |z|^k of the algebraic terms
    logz = cmath.log(z)
    re_parts, im_parts = [], []
    prev = math.inf
    partial = 0j
    kk = 1
    while True:
        g = alpha * kk - beta + 1
        env = (math.lgamma(g) if g > 0 else 0.0) - kk * logz.real
        if g > 1 and env > prev:
            break
        t = -cmath.exp(-kk * logz) * rgamma(beta - alpha * kk)
        re_parts.append(t.real)
        im_parts.append(t.imag)
        partial += t
        if partial != 0 and env < math.log(abs(partial)) - 46:
            break
        prev = env
        kk += 1
    return out + complex(math.fsum(re_parts), math.fsum(im_parts))


def ml(alpha: float, beta: float, z: complex) -> complex:
    r"""Evaluate :math:`E_{\alpha,\beta}(z) = \sum_k z^k / \Gamma(\alpha k + \beta)`.

    :raises ValueError: if *alpha* is not positive.
    :raises AccuracyDomainError: if *z* is outside the validated domain.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive: got {alpha}")
    z = complex(z)
    if not cmath.isfinite(z):
        raise AccuracyDomainError(f"non-finite argument {z}")
    X = abs(z) ** (1.0 / alpha)
    if X <= SERIES_DOUBLE_LIMIT:
        return _series_double(alpha, beta, z)
    if X < ASYMPTOTIC_LIMIT:
        return _series_mp(alpha, beta, z)
    if abs(cmath.phase(-z)) <= ASYMPTOTIC_ANGLE:
        return _asymptotic(alpha, beta, z, X)
    raise AccuracyDomainError(
        f"E_{{{alpha},{beta}}}({z}) is outside the validated accuracy domain"
    )


def ml_array(alpha: float, beta: float, z: Array) -> Array:
    """Elementwise :func:`ml`; real input gives a real result."""
    z = np.asarray(z)
    out = np.array([ml(alpha, beta, complex(v)) for v in z.ravel()]).reshape(z.shape)
    if np.isrealobj(z):
        return out.real
    return out
