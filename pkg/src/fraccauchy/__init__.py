"""Propagators and mild solutions of fractional Cauchy problems.

The problem ``d^alpha u + A u = f``, ``0 < alpha < 2``, with a sectorial
operator ``A`` is solved through contour quadrature of the resolvent
``(z^alpha + A)^{-1}``.
"""

from fraccauchy.contour import (
    ContourSpec,
    PropagatorRequest,
    QuadratureGrid,
    build_contour,
    default_contour,
    integrand_norm_profile,
    propagator_apply,
)
from fraccauchy.core import (
    AccuracyDomainError,
    DimensionMismatch,
    FractionalCauchyError,
    FractionalOrder,
    NumericalFailure,
    ProblemData,
    RegularityRefusal,
    SectorialOperator,
    SectorViolation,
    SingularResolvent,
    SpectralSector,
    UnsupportedOperator,
    check_sector_bound,
    fractional_power_apply,
)
from fraccauchy.fracint import TimeGrid, caputo_derivative, rl_integral
from fraccauchy.mittag_leffler import ml, ml_array
from fraccauchy.operators import (
    DiagonalOperator,
    Laplacian1D,
    make_diagonal,
    make_laplacian_1d,
    make_scalar,
    manufacture_data,
)
from fraccauchy.solvers import (
    MildSolver,
    SolutionRecord,
    SolverConfig,
    mild_residual,
    solve_classic,
    solve_li,
    solve_ml_oracle,
    solve_new,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyDomainError",
    "ContourSpec",
    "DiagonalOperator",
    "DimensionMismatch",
    "FractionalCauchyError",
    "FractionalOrder",
    "Laplacian1D",
    "MildSolver",
    "NumericalFailure",
    "ProblemData",
    "PropagatorRequest",
    "QuadratureGrid",
    "RegularityRefusal",
    "SectorViolation",
    "SectorialOperator",
    "SingularResolvent",
    "SolutionRecord",
    "SolverConfig",
    "SpectralSector",
    "TimeGrid",
    "UnsupportedOperator",
    "build_contour",
    "caputo_derivative",
    "check_sector_bound",
    "default_contour",
    "fractional_power_apply",
    "integrand_norm_profile",
    "make_diagonal",
    "make_laplacian_1d",
    "make_scalar",
    "manufacture_data",
    "mild_residual",
    "ml",
    "ml_array",
    "propagator_apply",
    "rl_integral",
    "solve_classic",
    "solve_li",
    "solve_ml_oracle",
    "solve_new",
]
