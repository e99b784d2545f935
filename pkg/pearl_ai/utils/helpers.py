"""
Helper utilities for PEaRL.
"""

import hashlib
import sys
import zlib
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
from loguru import logger
from scipy import stats


def configure_logging(level: str = "INFO", json_path: Optional[Path] = None) -> None:
    """
    Replace the default loguru sink.

    Args:
        level: Minimum level for the stderr sink
        json_path: Optional file receiving serialized (JSON lines) records
    """
    logger.remove()  # Remove default handler
    logger.add(sys.stderr, level=level.upper())
    if json_path is not None:
        logger.add(str(json_path), level="DEBUG", serialize=True)


class RandomStreams:
    """
    Named, independent random substreams derived from one root seed.

    Each name maps to its own ``numpy.random.Generator`` seeded from
    (root seed, CRC32(name)), so streams do not interfere with each other.
    """

    def __init__(self, root_seed: int):
        """Initialize with the run's root seed."""
        self.root_seed = int(root_seed)
        self._streams: Dict[str, np.random.Generator] = {}

    def get(self, name: str) -> np.random.Generator:
        """Return the generator for a named substream, creating it on first use."""
        if name not in self._streams:
            self._streams[name] = np.random.default_rng(self.seed_for(name))
        return self._streams[name]

    def fresh(self, name: str) -> np.random.Generator:
        """A new generator at the start of the named substream."""
        return np.random.default_rng(self.seed_for(name))

    def seed_for(self, name: str) -> np.random.SeedSequence:
        """Seed sequence for a named substream."""
        return np.random.SeedSequence([self.root_seed, zlib.crc32(name.encode("utf-8"))])

    def child_seed(self, name: str) -> int:
        """Integer seed for handing a substream to another component."""
        return int(self.seed_for(name).generate_state(1)[0])


def temp_c_to_f(temp_c: float) -> float:
    """Convert temperature from Celsius to Fahrenheit."""
    return 1.8 * temp_c + 32.0


def temp_f_to_c(temp_f: float) -> float:
    """Convert temperature from Fahrenheit to Celsius."""
    return (temp_f - 32.0) / 1.8


def sha256_file(path: Path) -> str:
    """
    Hash a file's bytes.

    Args:
        path: File to hash

    Returns:
        Hex digest
    """
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def format_layers(branches: Sequence[int]) -> str:
    """
    Render an eligibility cell: ``L1,6`` for branches {0, 5}, ``×`` when empty.

    Args:
        branches: Zero-based branch indices

    Returns:
        Cell text with one-based layer numbers
    """
    if not branches:
        return "×"
    return "L" + ",".join(str(b + 1) for b in sorted(branches))


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Spearman rank correlation.

    Args:
        x: First sample
        y: Second sample

    Returns:
        Correlation in [-1, 1]; 0.0 when either sample is constant
    """
    if np.ptp(np.asarray(x, dtype=float)) == 0 or np.ptp(np.asarray(y, dtype=float)) == 0:
        return 0.0
    rho, _ = stats.spearmanr(x, y)
    return float(rho)
