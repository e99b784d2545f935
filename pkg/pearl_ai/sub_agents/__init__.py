"""Sub-agents for PEaRL AI."""

from .adversary_agent import AdversaryAgent
from .confidence_agent import ConfidenceAgent
from .runtime_agent import RuntimeAgent, VariabilityMonitor
from .training_agent import TrainingAgent

__all__ = [
    "AdversaryAgent",
    "ConfidenceAgent",
    "RuntimeAgent",
    "TrainingAgent",
    "VariabilityMonitor",
]
