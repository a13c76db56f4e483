"""Exceptions raised for malformed or inconsistent streams."""


class StreamError(ValueError):
    """Base class for every decoding failure; never raised for programming errors."""
