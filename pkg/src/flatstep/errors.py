"""Exception hierarchy shared by all modules.

Every error raised on purpose by the package derives from
:class:`FlatstepError`.  The command line runner maps
:class:`ValidationError` subclasses to exit code 2 and every other
:class:`FlatstepError` to exit code 3.
"""


class FlatstepError(Exception):
    """Base class for all package errors."""


class ValidationError(FlatstepError, ValueError):
    """Input rejected before any numerical work was attempted."""


class InvalidInput(ValidationError):
    """Malformed, non-finite or dimensionally inconsistent input."""


class Unsupported(ValidationError):
    """Requested variant or order is outside what is implemented."""


class NotSPD(ValidationError):
    """A matrix required to be symmetric positive definite is not."""


class NumericalError(FlatstepError, ArithmeticError):
    """A numerical routine failed or produced an unusable result."""


class BranchError(NumericalError):
    """Spectrum touches the branch cut of the principal logarithm."""


class StepTooLarge(NumericalError):
    """The step size makes a resolvent update singular."""


class Unstable(NumericalError):
    """A multistep method is not Schur stable where stability is required."""


class OutOfDomain(NumericalError):
    """Argument lies outside the domain where a formula is defined."""


class DegenerateStationaryPoint(NumericalError):
    """Second derivative of the phase vanishes at a stationary point."""


class NotAWall(NumericalError):
    """The point is neither on the unit circle nor a root collision."""


class PoleAtWall(NumericalError):
    """A wall-crossing formula has a vanishing denominator."""


class DegenerateSwitch(NumericalError):
    """Consecutive cut directions are orthogonal, so the jump is undefined."""


class OracleContractViolation(FlatstepError):
    """A separation oracle reported infeasibility without a usable cut."""


class NotConverged(NumericalError):
    """An iterative solver hit its iteration cap.

    Attributes
    ----------
    result : object
        Best iterate available when the cap was reached.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
