"""Exception hierarchy shared by every polarlab module."""


class PolarLabError(Exception):
    """Base class for all library errors."""


class NonHermitianInput(PolarLabError, ValueError):
    pass


class NegativeEigenvalue(PolarLabError, ValueError):
    pass


class DimMismatch(PolarLabError, ValueError):
    pass


class InvalidDistribution(PolarLabError, ValueError):
    pass


class ParseError(PolarLabError, ValueError):
    pass


class InvariantViolation(PolarLabError, ValueError):
    """A loaded object breaks one of its invariants.

    ``index`` locates the offending matrix (if any) and ``bound`` names the
    violated bound, so that file ingestion can point at the culprit.
    """

    def __init__(self, message, index=None, bound=None):
        super().__init__(message)
        self.index = index
        self.bound = bound


class BadLength(PolarLabError, ValueError):
    pass


class LengthMismatch(PolarLabError, ValueError):
    pass


class BudgetExceeded(PolarLabError, MemoryError):
    pass


class NonMonotonePath(PolarLabError, ValueError):
    pass


class RateInfeasible(PolarLabError, ValueError):
    pass


class InvalidFactorization(PolarLabError, ValueError):
    pass


class ConfigError(PolarLabError, ValueError):
    pass


class MissingInput(PolarLabError, FileNotFoundError):
    pass
