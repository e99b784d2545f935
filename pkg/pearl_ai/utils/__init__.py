"""Utility modules for PEaRL."""

from .validators import (
    ComfortModelError,
    DivergenceError,
    InfeasibleExitError,
    PearlError,
    SchemaError,
)
from .helpers import RandomStreams, configure_logging

__all__ = [
    "ComfortModelError",
    "DivergenceError",
    "InfeasibleExitError",
    "PearlError",
    "SchemaError",
    "RandomStreams",
    "configure_logging",
]
