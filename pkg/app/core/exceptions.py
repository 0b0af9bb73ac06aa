"""Exception types raised by the spline toolkit."""

from typing import Optional


class SplineError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(SplineError, ValueError):
    """Raised for malformed partitions, duplicate nodes or out-of-range indices."""


class DomainError(SplineError, ValueError):
    """Raised when a value is requested outside the domain of a function or spline."""


class InternalConsistencyError(SplineError):
    """Raised when a knot plan and the pieces built from it disagree."""


class AdmissibilityError(SplineError):
    """
    Raised when a partition is not "almost equidistant" enough for the construction.

    Args:
        condition: Name of the violated check (e.g. "center_in_interval", "knot_gap")
        index: Descending index at which the check failed
        detail: Human readable description
    """

    def __init__(self, condition: str, index: Optional[int], detail: str):
        self.condition = condition
        self.index = index
        self.detail = detail
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"admissibility condition '{condition}' violated{where}: {detail}")


class ExpressionSyntaxError(SplineError):
    """Raised by the expression parser; `offset` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at offset {offset})")


class UnknownIdentifierError(ExpressionSyntaxError):
    """Raised when an expression names a variable or function that does not exist."""
