"""Utility modules for mobisearch."""

from .errors import MobiSearchError, ValidationFailure
from .logging import LoggerMixin, setup_logging
from .seeding import substream

__all__ = [
    "LoggerMixin",
    "MobiSearchError",
    "ValidationFailure",
    "setup_logging",
    "substream",
]
