"""Exception types shared across the package.

The CLI maps these onto exit codes: DomainError (and bad config) -> 2,
NumericalError -> 3, ResourceError -> 4.
"""


class CurvscapeError(Exception):
    """Base class for all package errors."""


class DomainError(CurvscapeError, ValueError):
    """An argument violates an operation's preconditions."""


class NumericalError(CurvscapeError, ArithmeticError):
    """A numerical routine failed to converge or produced a non-finite value."""


class ResourceError(CurvscapeError, RuntimeError):
    """A computation exceeded its memory or size budget."""
