"""Exception types shared across the package.

The CLI maps these onto exit codes: bad inputs and unmet preconditions
exit with 3, violated numerical properties exit with 2.
"""


class RankLabError(Exception):
    """Base class for all package errors."""


class InputError(RankLabError):
    """Malformed or out-of-contract input (bad matrix, unknown name, bad config)."""


class PreconditionError(RankLabError):
    """A documented precondition of an operation does not hold for the given data."""


class DegenerateEigenvalueError(RankLabError):
    """Eigenvalue derivative requested at a (numerically) repeated eigenvalue.

    Callers are expected to mask the offending sample point rather than
    recover, since perturbation formulas for simple eigenvalues do not
    apply there.
    """


class ConsistencyError(RankLabError):
    """An internal dual-route self-check disagreed beyond tolerance."""


class SolverError(RankLabError):
    """Newton iteration diverged or left the operator's validity region."""
