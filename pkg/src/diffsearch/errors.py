"""Exception types shared across the package."""


class DiffsearchError(Exception):
    """Base class for all package-specific errors."""


class SingularSystem(DiffsearchError):
    """Linear system is singular to working precision."""


class NonFiniteCost(DiffsearchError):
    """Objective returned nan or inf."""


class DomainError(DiffsearchError):
    """Point lies outside the coordinate bounds."""


class InvalidDistribution(DiffsearchError):
    """Tabulated CDF cannot be repaired into a valid distribution."""


class UnknownProblem(DiffsearchError):
    """Requested benchmark name is not registered."""


class DimensionError(DiffsearchError):
    """Vector dimensions do not agree."""


class OracleTooLarge(DiffsearchError):
    """Exact-solver table would exceed the memory budget."""
