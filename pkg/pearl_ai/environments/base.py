"""
Common surface of the simulated environments.
"""

import copy
from abc import ABC, abstractmethod
from typing import Any, Dict, Sequence, Tuple

import numpy as np

StepResult = Tuple[np.ndarray, float, bool, Dict[str, Any]]


class Environment(ABC):
    """
    Gym-like environment.

    ``step`` returns ``(observation, reward, done, info)`` where ``done`` marks
    true termination and ``info`` describes the state in which the action was
    taken (``s_id``, ``s_coarse``, ``truth``, ``phase``, ``day``), the raw
    action value shared with the cloud (``a_value``), the resulting
    ``utility`` and whether the episode was ``truncated``.
    """

    observation_dim: int
    action_count: int
    n_states: int
    n_states_coarse: int
    steps_per_day: int
    reward_scale: float = 1.0
    k_max: int = 12

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    @abstractmethod
    def reset(self) -> np.ndarray:
        """Start a new episode and return the first observation."""

    @abstractmethod
    def step(self, action: int) -> StepResult:
        """Apply an action."""

    @abstractmethod
    def action_value(self, action: int) -> float:
        """Raw value of an action as observed by the cloud."""

    @abstractmethod
    def utility_summary(self, utilities: Sequence[float]) -> Dict[str, float]:
        """Aggregate per-step utilities; the ``score`` key ranks exit branches."""

    def check_action(self, action: int) -> int:
        action = int(action)
        if not 0 <= action < self.action_count:
            raise ValueError(f"action {action} outside [0, {self.action_count})")
        return action

    def clone(self) -> "Environment":
        """Independent copy including the random generator state."""
        return copy.deepcopy(self)
