import cmath
import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraccauchy import AccuracyDomainError, ml
from fraccauchy.mittag_leffler import _series_mp, series_terms


def test_exponential():
    assert ml(1, 1, -1) == pytest.approx(math.exp(-1), rel=1e-14)


def test_cosine():
    assert ml(2, 1, -1) == pytest.approx(math.cos(1), rel=1e-14)


def test_half_order_erfc():
    # E_{1/2}(-x) = exp(x^2) erfc(x), evaluated independently in multiprecision
    expected = float(mpmath.e * mpmath.erfc(1))
    assert ml(0.5, 1, -1) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("beta", [1.0, 2.0, 0.5, 1.5, 3.7])
def test_value_at_zero(beta):
    assert ml(0.8, beta, 0) == pytest.approx(1 / math.gamma(beta), rel=1e-15)


@pytest.mark.parametrize("x", [0.5, 3.0, 20.0, 49.0])
def test_exp_along_negative_axis(x):
    assert ml(1, 1, -x) == pytest.approx(math.exp(-x), rel=1e-12)


@pytest.mark.parametrize("x", [0.5, 2.0, 7.0])
def test_cosh_and_cos(x):
    assert ml(2, 1, x * x) == pytest.approx(math.cosh(x), rel=1e-13)
    assert ml(2, 1, -x * x).real == pytest.approx(math.cos(x), rel=1e-11, abs=1e-13)


@pytest.mark.parametrize("alpha,beta,z", [(0.5, 1.0, -30.0), (0.25, 0.25, -2.0), (1.5, 2.0, -40.0), (0.9, 0.9, -50.0)])
def test_against_mpmath_series(alpha, beta, z):
    with mpmath.workdps(80):
        ref = mpmath.nsum(lambda k: mpmath.mpf(z) ** k / mpmath.gamma(alpha * k + beta), [0, mpmath.inf])
    assert ml(alpha, beta, z) == pytest.approx(complex(ref), rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.2, 1.95),
    beta=st.sampled_from([1.0, 2.0, 0.5]),
    x=st.floats(0.0, 50.0),
    phase=st.floats(-0.05, 0.05),
)
def test_recurrence(alpha, beta, x, phase):
    z = -x * cmath.exp(1j * phase)
    lhs = ml(alpha, beta, z)
    rhs = z * ml(alpha, alpha + beta, z) + 1 / math.gamma(beta)
    scale = max(abs(lhs), abs(z * ml(alpha, alpha + beta, z)), 1 / math.gamma(beta))
    assert abs(lhs - rhs) <= 1e-11 * scale


@pytest.mark.parametrize("alpha,beta,z", [(0.5, 1.0, -20.0), (1.5, 2.0, -30.0), (0.25, 0.25, -3.0)])
def test_cutoff_doubling(alpha, beta, z):
    K = series_terms(alpha, beta, complex(z))
    a = _series_mp(alpha, beta, complex(z), terms=K)
    b = _series_mp(alpha, beta, complex(z), terms=2 * K)
    assert abs(a - b) <= 1e-13 * max(abs(a), 1e-300)


def test_nonpositive_alpha_rejected():
    with pytest.raises(ValueError):
        ml(0.0, 1.0, -1.0)


def test_outside_domain_raises():
    # large modulus away from the negative axis is outside the validated domain
    with pytest.raises(AccuracyDomainError):
        ml(0.5, 1.0, 1e4j)
