"""
Run-artifact tools for PEaRL.
Reads and writes everything a run directory holds: manifest, checkpoint,
CSV tables and JSON summaries.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd
from loguru import logger
from pydantic import BaseModel

from .models.ee_qnet import EEQNetwork
from .schemas.budgets import ExperimentConfig
from .schemas.records import RunManifest
from .utils.helpers import configure_logging, sha256_file
from .utils.validators import SchemaError, validate_columns

CHECKPOINT_NAME = "checkpoint.pearl"
MANIFEST_NAME = "manifest.json"


class PearlTools:
    """File operations on one run directory ``<output_dir>/<run_id>/``."""

    def __init__(self, output_dir: str, run_id: str, create: bool = True):
        """
        Initialize the run directory.

        Args:
            output_dir: Root of all runs
            run_id: Name of this run's directory
            create: Create the directory (False for read-only access)
        """
        self.run_id = run_id
        self.run_dir = Path(output_dir) / run_id
        if create:
            self.run_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.run_dir / name

    @property
    def checkpoint_path(self) -> Path:
        return self.path(CHECKPOINT_NAME)

    def attach_json_log(self, level: str) -> None:
        """Send structured logs of this run to ``log.jsonl`` in the run directory."""
        configure_logging(level, json_path=self.path("log.jsonl"))

    def write_csv(self, name: str, frame: pd.DataFrame, index: bool = False) -> Path:
        """
        Write a data frame as CSV.

        Args:
            name: File name inside the run directory
            frame: Data to write
            index: Keep the frame index as a column

        Returns:
            Written path
        """
        target = self.path(name)
        frame.to_csv(target, index=index)
        logger.debug(f"Wrote {len(frame)} rows to {target}")
        return target

    def write_json(self, name: str, payload: Any) -> Path:
        """Write a pydantic model or a plain mapping as JSON."""
        target = self.path(name)
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(indent=2)
        else:
            text = json.dumps(payload, indent=2, sort_keys=True, default=str)
        target.write_text(text, encoding="utf-8")
        logger.debug(f"Wrote {target}")
        return target

    def read_json(self, name: str) -> Optional[Dict[str, Any]]:
        """Load a JSON artifact, None when absent."""
        target = self.path(name)
        if not target.exists():
            return None
        return json.loads(target.read_text(encoding="utf-8"))

    def read_csv(self, name: str) -> Optional[pd.DataFrame]:
        """Load a CSV artifact, None when absent."""
        target = self.path(name)
        if not target.exists():
            return None
        return pd.read_csv(target)

    def save_checkpoint(self, net: EEQNetwork, metadata: Dict[str, Any]) -> str:
        """
        Save the network and return the checkpoint's SHA-256.
        """
        net.save(self.checkpoint_path, metadata)
        return sha256_file(self.checkpoint_path)

    def write_manifest(
        self,
        command: str,
        config: ExperimentConfig,
        version: str,
        checkpoint_sha256: Optional[str] = None,
    ) -> RunManifest:
        """
        Record provenance of the run.

        Args:
            command: Subcommand that produced the run
            config: Effective experiment configuration
            version: Package version
            checkpoint_sha256: Hash of the checkpoint used or produced

        Returns:
            The manifest written to ``manifest.json``
        """
        manifest = RunManifest(
            run_id=self.run_id,
            command=command,
            root_seed=config.seed,
            config=config.model_dump(mode="json"),
            checkpoint_sha256=checkpoint_sha256,
            package_version=version,
        )
        self.write_json(MANIFEST_NAME, manifest)
        return manifest


def read_table(path: Path, required: list, source: str) -> pd.DataFrame:
    """
    Read a CSV given on the command line and check its columns.

    Raises:
        SchemaError: File missing, unparsable or lacking columns
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"Cannot read {source} file {path}: {e}")
        raise SchemaError(f"{source}: cannot read {path}: {e}") from e
    validate_columns(frame, required, source)
    return frame
