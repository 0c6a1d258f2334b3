"""Exception hierarchy shared by every module."""


class BayesLassoError(Exception):
    """Base class for errors raised by this package."""


class DomainError(BayesLassoError, ValueError):
    """An argument lies outside the domain of the function."""


class DimensionError(BayesLassoError, ValueError):
    """Array shapes are inconsistent with the geometry context."""


class SingularDirectionError(DomainError):
    """The direction lies (numerically) in the kernel of A."""


class NumericalError(BayesLassoError, RuntimeError):
    """A numerical procedure failed to converge.

    ``payload`` carries whatever diagnostic values the failing routine had
    at hand (arguments, partial estimates, error estimates).
    """

    def __init__(self, message, **payload):
        super().__init__(message)
        self.payload = payload
