"""Exception hierarchy shared by all solver modules."""


class EllipticFundError(Exception):
    """Base class for package errors."""


class InvalidInputError(EllipticFundError):
    """Input violates a documented precondition or schema rule."""


class ConvergenceError(EllipticFundError):
    """An iterative solver failed to converge within its budget.

    The offending last state, when useful, is attached as ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class StepSizeError(ConvergenceError):
    """Positivity was lost and automatic step halving did not recover it."""


class BracketError(EllipticFundError):
    """A root bracket is invalid; carries the offending samples."""

    def __init__(self, message, samples=None):
        super().__init__(message)
        self.samples = samples or []


class DecompositionError(EllipticFundError):
    """No nonnegative stencil decomposition exists at the maximum width."""


class ClassificationError(EllipticFundError):
    """Singularity classification is outside the theorem hypotheses or inconclusive."""


class LadderError(EllipticFundError):
    """A radius ladder produced unusable Monte Carlo estimates."""


class NoPowerLawError(LadderError):
    """Exit probabilities do not decay polynomially along the ladder."""
