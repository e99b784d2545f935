"""
Configuration management for PEaRL.
Loads settings from environment variables and provides typed configuration access.
"""

from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Library defaults loaded from environment variables (prefix ``PEARL_``)."""

    model_config = SettingsConfigDict(
        env_prefix="PEARL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Application Settings
    log_level: str = Field(default="INFO", description="Logging level")
    log_json: bool = Field(default=False, description="Also write serialized JSON logs into the run directory")
    output_dir: str = Field(default="runs", description="Root directory for run artifacts")

    # Network shape
    trunk_width: int = Field(default=64, gt=0, description="Hidden width of every trunk layer")
    head_width: int = Field(default=32, gt=0, description="Hidden width of exit branches and confidence heads")
    n_layers: int = Field(default=10, ge=1, description="Trunk layers (and exit branches)")

    # Optimizer
    optimizer: str = Field(default="adam", description="Optimizer kind: adam or sgd")
    learning_rate: float = Field(default=1e-3, gt=0, description="Q-network learning rate")
    head_learning_rate: float = Field(default=1e-3, gt=0, description="Confidence head learning rate")
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)

    # Phase 1 (sequential EE-DQN training)
    gamma: float = Field(default=0.95, ge=0, lt=1, description="Discount factor")
    epsilon_start: float = Field(default=1.0, ge=0, le=1)
    epsilon_end: float = Field(default=0.05, ge=0, le=1)
    epsilon_decay_fraction: float = Field(
        default=0.5,
        gt=0,
        le=1,
        description="Fraction of each layer stage over which epsilon decays linearly"
    )
    batch_size: int = Field(default=16, ge=1, description="Replay minibatch size")
    target_sync_interval: int = Field(default=500, ge=1, description="Steps between target network syncs")
    steps_per_layer: int = Field(default=20000, ge=1, description="Environment steps per layer stage")
    replay_capacity: int = Field(default=10000, ge=1, description="Replay buffer capacity")

    # Phase 2 (confidence paths)
    mi_window: int = Field(default=168, ge=1, description="Interactions per MI window (7 days x 24 h)")
    mi_bias_correction: bool = Field(default=False, description="Apply Miller-Madow correction to MI")
    phase2_steps: int = Field(default=168 * 8, ge=1, description="Environment steps used to build label buffers")
    head_epochs: int = Field(default=30, ge=1, description="Epochs of confidence head training")
    head_batch_size: int = Field(default=64, ge=1)
    head_holdout: float = Field(default=0.2, gt=0, lt=1, description="Held-out fraction for head accuracy")
    decision_threshold: float = Field(default=0.5, gt=0, lt=1, description="Sigmoid threshold for a 1 label")

    # Runtime / variability monitor
    variability_threshold: float = Field(default=0.8, gt=0, le=1, description="v in I_threshold = v * I_max")
    retrain_updates: int = Field(default=5000, ge=1, description="Gradient updates per retraining event")

    # Adversary
    kmeans_restarts: int = Field(default=10, ge=1)
    kmeans_max_iter: int = Field(default=300, ge=1)
    elbow_k_max: int = Field(default=12, ge=2)
    elbow_k_max_vr: int = Field(default=10, ge=2)

    # Harness
    sweep_workers: int = Field(default=1, ge=1, description="Parallel sweep cells")


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get or create global settings instance."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reload_settings() -> Settings:
    """Reload settings from environment (useful for testing)."""
    global _settings
    _settings = Settings()
    return _settings


# Convenience access
settings = get_settings()
