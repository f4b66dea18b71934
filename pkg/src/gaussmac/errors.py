"""Exception hierarchy for gaussmac."""


class GaussMacError(ValueError):
    """Base class for all domain errors raised by this package."""


class NonPositiveVariance(GaussMacError):
    pass


class DegenerateCorrelation(GaussMacError):
    pass


class MismatchedNoise(GaussMacError):
    pass


class OutOfDomain(GaussMacError):
    pass


class NoConvergence(GaussMacError):
    pass


class SingularK(GaussMacError):
    pass


class InfeasibleAlpha(GaussMacError):
    pass


class NoSignChange(GaussMacError):
    pass


class EmptyFeasible(GaussMacError):
    pass


class ZeroInput(GaussMacError):
    pass


class BudgetExceeded(GaussMacError):
    """Requested codebook or codebook-pair search is too large to enumerate."""
