"""Exception types and their CLI exit codes."""


class EntropyLabError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class UsageError(EntropyLabError, ValueError):
    """Invalid arguments or configuration supplied by the caller."""

    exit_code = 2


class StructuralError(EntropyLabError):
    """The input object violates a structural requirement (e.g. reducibility)."""


class NumericError(EntropyLabError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class DomainError(EntropyLabError, ValueError):
    """Input outside the domain where a formula is defined."""


class CountOverflowError(EntropyLabError, OverflowError):
    """An exact combinatorial count exceeds the supported range."""
