"""Exception hierarchy.

Validation errors (bad input) and numerical failures are kept apart so the
command line can map them to distinct exit codes.
"""


class UTMError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(UTMError, ValueError):
    """Input violates a documented invariant."""


class NumericalError(UTMError, ArithmeticError):
    """A numerical procedure failed to meet its tolerance."""


class NoConvergence(NumericalError):
    pass


class OutsideDomain(ValidationError):
    pass


class DerivativeSingular(NumericalError):
    pass


class RankDeficient(ValidationError):
    pass


class SingularH(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class DegeneratePrincipalPart(NumericalError):
    pass


class CountMismatch(NumericalError):
    pass


class NoValidR(NumericalError):
    pass


class NearZeroDelta(NumericalError):
    pass


class UntaggedLambda(ValidationError):
    pass


class NotInDomain(ValidationError):
    pass


class BudgetExceeded(NumericalError):
    pass


class NonConvergentPV(NumericalError):
    pass


class OverflowGuard(NumericalError):
    pass


class GridTooCoarse(ValidationError):
    pass
