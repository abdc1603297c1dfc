"""Exception and warning types shared across the package."""


class LatHError(Exception):
    """Base class for all package errors."""


class UsageError(LatHError, ValueError):
    """Invalid arguments or incompatible shapes/configuration."""


class DomainError(LatHError, ValueError):
    """A numeric input lies outside the domain of an operation."""


class ParseError(LatHError):
    """A binary file could not be decoded.

    ``offset`` is the byte position at which decoding failed, if known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(ParseError):
    """A decoded file violates a content invariant (e.g. non-finite values)."""


class IncompatibleVersionError(ParseError):
    """File was written by an unsupported format version."""


class DivergenceError(LatHError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, step, last_report):
        super().__init__(f"non-finite loss at step {step}; last finite report: {last_report}")
        self.step = step
        self.last_report = last_report


class HierarchyWarning(UserWarning):
    """A hierarchical loss was skipped because no triplets could be formed."""
