"""
Experiment, budget and training configuration models.
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import get_settings


class EnvKind(str, Enum):
    """Simulated environments."""
    THERMAL = "thermal"
    VR = "vr"
    TOY = "toy"


class OptimizerKind(str, Enum):
    """Gradient optimizers."""
    SGD = "sgd"
    ADAM = "adam"


class StateBinning(str, Enum):
    """How raw states are discretized for the MI estimator."""
    FULL = "full"      # activity x temperature bucket (thermal), 8 states (VR)
    COARSE = "coarse"  # activity only (thermal)


class ClusterFeatures(str, Enum):
    """Feature construction for the clustering adversary."""
    HOURLY = "hourly"
    DAILY = "daily"


HUMANS: Dict[EnvKind, tuple] = {
    EnvKind.THERMAL: ("H1", "H2", "H3"),
    EnvKind.VR: ("P1", "P2", "P3"),
    EnvKind.TOY: ("toy",),
}


class BudgetConfig(BaseModel):
    """Utility budget u, privacy budget p and variability threshold v."""

    model_config = ConfigDict(frozen=True)

    u: float = Field(default=0.75, gt=0, le=1, description="Utility budget: fraction of Q_max a branch must reach")
    p: float = Field(default=0.7, gt=0, le=1, description="Privacy budget: fraction of I_max a branch must stay below")
    v: float = Field(
        default_factory=lambda: get_settings().variability_threshold,
        gt=0,
        le=1,
        description="Variability threshold fraction of I_max",
    )


class QTrainConfig(BaseModel):
    """Phase-1 deep Q-learning hyperparameters."""

    gamma: float = Field(default_factory=lambda: get_settings().gamma, ge=0, lt=1)
    epsilon_start: float = Field(default_factory=lambda: get_settings().epsilon_start, ge=0, le=1)
    epsilon_end: float = Field(default_factory=lambda: get_settings().epsilon_end, ge=0, le=1)
    epsilon_decay_fraction: float = Field(
        default_factory=lambda: get_settings().epsilon_decay_fraction, gt=0, le=1
    )
    batch_size: int = Field(default_factory=lambda: get_settings().batch_size, ge=1)
    target_sync_interval: int = Field(default_factory=lambda: get_settings().target_sync_interval, ge=1)
    steps_per_layer: int = Field(default_factory=lambda: get_settings().steps_per_layer, ge=1)
    replay_capacity: int = Field(default_factory=lambda: get_settings().replay_capacity, ge=1)
    learning_rate: float = Field(default_factory=lambda: get_settings().learning_rate, gt=0)
    optimizer: OptimizerKind = Field(default_factory=lambda: OptimizerKind(get_settings().optimizer))
    reward_scale: Optional[float] = Field(
        default=None,
        gt=0,
        description="Multiplier applied to rewards before TD targets; None uses the environment default"
    )

    def epsilon_at(self, step: int) -> float:
        """Linear epsilon decay over the first fraction of a stage, constant afterwards."""
        decay_steps = max(1, int(self.epsilon_decay_fraction * self.steps_per_layer))
        if step >= decay_steps:
            return self.epsilon_end
        frac = step / decay_steps
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class MIWindowConfig(BaseModel):
    """Windowing of action traces for mutual information."""

    window_n: int = Field(default_factory=lambda: get_settings().mi_window, ge=1)
    binning: StateBinning = Field(default=StateBinning.FULL)
    bias_correction: bool = Field(default_factory=lambda: get_settings().mi_bias_correction)


class NetworkConfig(BaseModel):
    """Shape of the early-exit network."""

    n_layers: int = Field(default_factory=lambda: get_settings().n_layers, ge=1)
    trunk_width: int = Field(default_factory=lambda: get_settings().trunk_width, ge=1)
    head_width: int = Field(default_factory=lambda: get_settings().head_width, ge=1)


class RuntimeConfig(BaseModel):
    """Phase-2, inference, attack and drift durations."""

    phase2_steps: int = Field(default_factory=lambda: get_settings().phase2_steps, ge=1)
    head_epochs: int = Field(default_factory=lambda: get_settings().head_epochs, ge=1)
    head_learning_rate: float = Field(default_factory=lambda: get_settings().head_learning_rate, gt=0)
    eval_steps: int = Field(default=24 * 14, ge=1, description="Steps per forced-branch utility evaluation")
    days: int = Field(default=50, ge=1, description="Simulated days (thermal) or lectures (VR) per inference run")
    retrain_updates: int = Field(default_factory=lambda: get_settings().retrain_updates, ge=1)
    drift_days_before: int = Field(default=25, ge=1)
    drift_days_after: int = Field(default=25, ge=1)
    drift_from: Optional[str] = Field(default=None, description="Profile before the switch (default H3)")
    drift_to: Optional[str] = Field(default=None, description="Profile after the switch (default H1)")
    features: ClusterFeatures = Field(default=ClusterFeatures.HOURLY)
    k_max: Optional[int] = Field(default=None, ge=2, description="Elbow search range; None uses the environment default")


class ExperimentConfig(BaseModel):
    """
    Complete description of one experiment.

    Loaded from a YAML file with sections ``experiment``, ``network``,
    ``training``, ``budgets``, ``privacy``, ``runtime``, ``output`` and an
    optional ``house`` block of thermal-house overrides.
    """

    env: EnvKind = Field(default=EnvKind.THERMAL)
    human: str = Field(default="H1", description="Occupant profile (H1-H3) or VR tolerance profile (P1-P3)")
    seed: int = Field(default=0, ge=0, description="Root seed of the run")
    run_id: Optional[str] = Field(default=None, description="Run directory name; derived when omitted")
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    training: QTrainConfig = Field(default_factory=QTrainConfig)
    budgets: BudgetConfig = Field(default_factory=BudgetConfig)
    privacy: MIWindowConfig = Field(default_factory=MIWindowConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)
    house: Dict[str, Any] = Field(default_factory=dict, description="Thermal house parameter overrides")
    output_dir: str = Field(default_factory=lambda: get_settings().output_dir)

    @model_validator(mode="after")
    def check_ids(self) -> "ExperimentConfig":
        """Reject profile ids that do not exist for the chosen environment."""
        known = HUMANS[self.env]
        for name in (self.human, self.runtime.drift_from, self.runtime.drift_to):
            if name is not None and name not in known:
                raise ValueError(f"unknown profile '{name}' for env {self.env.value}; expected one of {known}")
        return self

    @property
    def steps_per_day(self) -> int:
        """Environment steps per simulated day (VR: per lecture)."""
        if self.env == EnvKind.THERMAL:
            return 24
        if self.env == EnvKind.VR:
            return 5
        return 24

    def derived_run_id(self, command: str) -> str:
        """Run directory name when none is configured."""
        if self.run_id:
            return self.run_id
        return f"{command}-{self.env.value}-{self.human}-s{self.seed}"

    def with_overrides(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        """
        Apply CLI flag overrides.

        Args:
            overrides: Flat mapping (u, p, v, seed, human, n_layers, output_dir); None values ignored

        Returns:
            A validated copy of the config
        """
        data = self.model_dump(mode="json")
        routes = {
            "u": ("budgets", "u"),
            "p": ("budgets", "p"),
            "v": ("budgets", "v"),
            "n_layers": ("network", "n_layers"),
            "steps_per_layer": ("training", "steps_per_layer"),
            "days": ("runtime", "days"),
        }
        for key, value in overrides.items():
            if value is None:
                continue
            if key in routes:
                section, field = routes[key]
                data[section][field] = value
            else:
                data[key] = value
        return ExperimentConfig.model_validate(data)

    @classmethod
    def from_yaml(cls, path: Path, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """
        Load an experiment file.

        Args:
            path: YAML file path
            overrides: Optional CLI overrides applied after loading

        Returns:
            Validated ExperimentConfig
        """
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}

        data: Dict[str, Any] = dict(raw.get("experiment", {}))
        for section in ("network", "training", "budgets", "privacy", "runtime", "house"):
            if section in raw:
                data[section] = raw[section]
        if "output" in raw:
            data["output_dir"] = raw["output"].get("dir", get_settings().output_dir)

        config = cls.model_validate(data)
        return config.with_overrides(overrides or {})
