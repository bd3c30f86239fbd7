"""Harness exception types."""


class HarnessError(Exception):
    """Base class for harness errors."""


class DataError(HarnessError):
    """Dataset manifest or labels are inconsistent."""


class ParameterError(HarnessError, ValueError):
    """An argument violates its contract."""
