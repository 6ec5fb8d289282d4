"""Shared exception base so callers can catch any library failure in one clause."""


class SRocketError(Exception):
    """Base class for all errors raised by this package."""
