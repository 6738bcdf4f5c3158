"""Shared exception types."""


class AggtermError(Exception):
    """Base class for package errors."""


class ConfigError(AggtermError):
    """A supplied configuration (model, schedule, architecture, CLI input) is invalid."""


class EvaluationError(AggtermError):
    """Term evaluation hit a numeric problem (non-finite value, bad denominator)."""


class NeighborhoodTooLargeError(AggtermError):
    """A rooted neighborhood exceeded the canonicalization size cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"neighborhood too large: {size} nodes exceeds cap {cap}")
        self.size = size
        self.cap = cap


class UnsupportedTermError(AggtermError):
    """The requested limit construction does not cover this term."""
