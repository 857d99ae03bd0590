"""Shared exception types."""


class UnsupportedMeasureError(ValueError):
    """Raised when an operation requires a Gaussian row measure."""
