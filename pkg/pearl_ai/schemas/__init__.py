"""Data schemas for PEaRL."""

from .budgets import (
    BudgetConfig,
    ClusterFeatures,
    EnvKind,
    ExperimentConfig,
    MIWindowConfig,
    NetworkConfig,
    OptimizerKind,
    QTrainConfig,
    RuntimeConfig,
    StateBinning,
)
from .records import (
    ActionTrace,
    BranchScore,
    ClusteringReport,
    DriftReport,
    ExitDecision,
    MIPoint,
    MISeries,
    PrivacyLabelRecord,
    RunManifest,
    RunReport,
    TraceEntry,
    TradeoffPoint,
    UtilityLabelRecord,
)

__all__ = [
    "BudgetConfig",
    "ClusterFeatures",
    "EnvKind",
    "ExperimentConfig",
    "MIWindowConfig",
    "NetworkConfig",
    "OptimizerKind",
    "QTrainConfig",
    "RuntimeConfig",
    "StateBinning",
    "ActionTrace",
    "BranchScore",
    "ClusteringReport",
    "DriftReport",
    "ExitDecision",
    "MIPoint",
    "MISeries",
    "PrivacyLabelRecord",
    "RunManifest",
    "RunReport",
    "TraceEntry",
    "TradeoffPoint",
    "UtilityLabelRecord",
]
