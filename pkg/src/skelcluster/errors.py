"""Exception types shared across the package."""

from __future__ import annotations


class SkelclusterError(Exception):
    """Base class for all package-specific errors."""


class DuplicatePair(SkelclusterError):
    """A constraint for this unordered pair is already stored."""


class DeduciblePair(SkelclusterError):
    """The pair was already deducible; storing it would be redundant.

    This signals an engine logic bug, not a user error: constraints are
    only supposed to be inserted when deduction returned Unknown.
    """


class DimensionMismatch(SkelclusterError):
    """A precomputed distance matrix does not match the dataset shape."""


class EmptyCandidates(SkelclusterError):
    """Nearest-neighbor search received no valid candidates."""


class PendingQueryExists(SkelclusterError):
    """A prior human query is still unanswered."""


class NoPendingQuery(SkelclusterError):
    """An answer arrived but no query is pending."""


class LengthMismatch(SkelclusterError):
    """Two labelings have different lengths."""


class EmptyTrace(SkelclusterError):
    """An ICE trace with no samples cannot be scored."""


class MissingLabels(SkelclusterError):
    """Ground-truth labels are required but absent or incomplete."""


class ParseError(SkelclusterError):
    """A CSV cell failed to parse. Carries 0-based row and column."""

    def __init__(self, row: int, column: int, message: str = ""):
        self.row = row
        self.column = column
        super().__init__(message or f"unparseable value at row {row}, column {column}")


class NonFiniteValue(SkelclusterError):
    """A feature value is NaN or infinite."""


class EmptyFile(SkelclusterError):
    """The input file contains no data rows."""


class InvalidSpec(SkelclusterError):
    """A dataset generation spec is out of range or inconsistent."""
