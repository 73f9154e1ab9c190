"""Shared exception hierarchy.

The CLI maps ConfigurationError to exit code 2 and every other MmragError
to exit code 1.
"""


class MmragError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MmragError):
    """Missing or inconsistent configuration (bad index kind, absent collection, ...)."""


class TransportError(MmragError):
    """A remote service could not be reached or answered with a failure status."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class AuthenticationError(TransportError):
    """Remote service rejected our credentials."""


class FormatError(MmragError):
    """A payload (file, image, response body) could not be decoded."""
