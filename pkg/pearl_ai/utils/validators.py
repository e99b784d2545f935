"""
Error types and input validation utilities.
"""

from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd


class PearlError(Exception):
    """Base class for errors raised by the PEaRL pipeline."""


class DivergenceError(PearlError):
    """A training loss became non-finite."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleExitError(PearlError):
    """No exit branch satisfies both the utility and privacy budgets."""

    def __init__(
        self,
        message: str,
        utility_scores: Optional[np.ndarray] = None,
        privacy_scores: Optional[np.ndarray] = None,
        greedy_actions: Optional[np.ndarray] = None,
    ):
        super().__init__(message)
        self.utility_scores = utility_scores
        self.privacy_scores = privacy_scores
        self.greedy_actions = greedy_actions


class ComfortModelError(PearlError):
    """The PMV clothing surface temperature iteration did not converge."""


class SchemaError(PearlError):
    """A CSV artifact does not carry the expected columns."""


def ensure_finite(value: float, what: str, diagnostics: Optional[Dict[str, Any]] = None) -> float:
    """
    Raise DivergenceError when a scalar loss is NaN or infinite.

    Args:
        value: Loss value
        what: Label used in the error message
        diagnostics: Extra context attached to the error

    Returns:
        The value unchanged
    """
    if not np.isfinite(value):
        raise DivergenceError(f"{what} diverged (loss={value})", diagnostics)
    return value


def validate_unit_interval(value: float, name: str, allow_zero: bool = False) -> float:
    """
    Validate that a budget-like value lies in (0, 1] (or [0, 1]).

    Args:
        value: Value to check
        name: Parameter name for the error message
        allow_zero: Accept 0 as the lower bound

    Returns:
        The value as float
    """
    low_ok = value >= 0 if allow_zero else value > 0
    if not (low_ok and value <= 1):
        bound = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return float(value)


def validate_vector(x: Any, length: int, name: str = "input") -> np.ndarray:
    """
    Coerce to a float vector (or batch of vectors) and check its trailing dimension.

    Args:
        x: Array-like input
        length: Expected trailing dimension
        name: Label for the error message

    Returns:
        Float ndarray
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] != length:
        raise ValueError(f"{name} dimension mismatch: expected {length}, got shape {arr.shape}")
    return arr


def validate_columns(frame: pd.DataFrame, required: Iterable[str], source: str) -> pd.DataFrame:
    """
    Check that a parsed CSV carries every required column.

    Args:
        frame: Parsed data frame
        required: Column names that must be present
        source: File name used in the error message

    Returns:
        The frame unchanged
    """
    missing: List[str] = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"{source} is missing columns: {', '.join(missing)}")
    return frame


def validate_same_length(a: Sequence[Any], b: Sequence[Any], what: str) -> None:
    """Raise ValueError when two sequences differ in length."""
    if len(a) != len(b):
        raise ValueError(f"{what}: length mismatch ({len(a)} != {len(b)})")
