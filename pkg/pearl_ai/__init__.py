"""
PEaRL AI - Privacy-aware early-exit reinforcement learning

This package contains the main orchestrator agent and the sub-agents that
train an early-exit Deep Q-Network, label and select exits under utility and
privacy budgets, monitor behaviour drift and audit leakage with a clustering
adversary.
"""

__version__ = "1.0.0"

from .agent import PearlMainAgent

__all__ = ["PearlMainAgent", "__version__"]
