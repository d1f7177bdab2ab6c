"""Exception types raised across the package."""


class LabError(Exception):
    """Base class for all package errors."""


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration."""


class SolverError(LabError, RuntimeError):
    """A numerical solver failed to produce a certified answer."""


class NoInterpolator(SolverError):
    """The linear system Xw = Y has no solution."""


class IllConditioned(SolverError):
    """The design is too ill-conditioned to certify interpolation."""


class NotConverged(SolverError):
    """An iterative solver hit its iteration cap."""


class Infeasible(SolverError):
    """The feasible set of an optimization problem is empty."""


class UnsupportedNorm(LabError, ValueError):
    pass


class ZeroVector(LabError, ValueError):
    pass


class ZeroCovariance(LabError, ValueError):
    pass


class SingularCovariance(LabError, ValueError):
    pass


class NotDiagonal(LabError, ValueError):
    pass


class UnsupportedForE4(LabError, ValueError):
    """The isotropic basis-pursuit norm bound needs an identity covariance."""


class DeltaOutOfRange(LabError, ValueError):
    pass


class BTooSmall(LabError, ValueError):
    pass


class KOutOfRange(LabError, ValueError):
    pass


class DegenerateTail(LabError, ValueError):
    pass


class EmptySequence(LabError, ValueError):
    pass


class DimensionMismatch(LabError, ValueError):
    pass
