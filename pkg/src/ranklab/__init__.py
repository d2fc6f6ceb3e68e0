"""Numerical verification lab for constant-rank structure of convex PDE solutions."""

__version__ = "0.1.0"

from .errors import (
    ConsistencyError,
    DegenerateEigenvalueError,
    InputError,
    PreconditionError,
    RankLabError,
    SolverError,
)
from .fields import (
    BoxDomain,
    FitReport,
    GridField,
    Jet4,
    PolynomialField,
    QuadraticField,
    RadialDistanceField,
    ScalarField,
    builtin_field,
    fit_polynomial,
    load_grid_field,
    load_polynomial_field,
    perturb_to_distinct,
    save_grid_field,
    save_polynomial_field,
)
from .symmat import (
    HessianEigenJet,
    Spectrum,
    eigenvalue_gradient,
    eigenvalue_hessian,
    hessian_eigen_jet,
    midpoint_concavity_defect,
    sym_eigh,
    weighted_eigsum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
