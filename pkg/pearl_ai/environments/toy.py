"""
Two-state, two-action deterministic MDP with a known optimal policy.
"""

from typing import Any, Dict, Sequence

import numpy as np

from .base import Environment, StepResult


class TwoStateMDP(Environment):
    """
    States alternate every step regardless of the action; reward 1 when the
    action index matches the current state, else 0.
    """

    observation_dim = 2
    action_count = 2
    n_states = 2
    n_states_coarse = 2
    steps_per_day = 24
    k_max = 4

    def __init__(self, rng: np.random.Generator, episode_length: int = 50):
        super().__init__(rng)
        self.episode_length = episode_length
        self.state = 0
        self._t = 0
        self._steps = 0

    def observation(self) -> np.ndarray:
        obs = np.zeros(2)
        obs[self.state] = 1.0
        return obs

    def reset(self) -> np.ndarray:
        self.state = int(self.rng.integers(0, 2))
        self._steps = 0
        return self.observation()

    def action_value(self, action: int) -> float:
        return float(action)

    def transition(self, state: int, action: int) -> tuple:
        """(next state, reward)."""
        action = self.check_action(action)
        return 1 - state, float(action == state)

    def step(self, action: int) -> StepResult:
        current = self.state
        self.state, reward = self.transition(current, action)
        self._steps += 1
        info: Dict[str, Any] = {
            "s_id": current,
            "s_coarse": current,
            "truth": current,
            "phase": self._t % self.steps_per_day,
            "day": self._t // self.steps_per_day,
            "a_value": float(action),
            "utility": reward,
            "truncated": self._steps % self.episode_length == 0,
        }
        self._t += 1
        return self.observation(), reward, False, info

    def utility_summary(self, utilities: Sequence[float]) -> Dict[str, float]:
        values = np.asarray(utilities, dtype=np.float64)
        mean = float(values.mean()) if values.size else 0.0
        std = float(values.std()) if values.size else 0.0
        return {"score": mean, "mean": mean, "std": std}


def value_iteration(gamma: float, tol: float = 1e-12) -> np.ndarray:
    """
    Optimal Q-table of the two-state MDP.

    Args:
        gamma: Discount factor in [0, 1)
        tol: Convergence tolerance

    Returns:
        Q[s, a]
    """
    q = np.zeros((2, 2))
    while True:
        v = q.max(axis=1)
        new_q = np.array([[float(a == s) + gamma * v[1 - s] for a in range(2)] for s in range(2)])
        if np.max(np.abs(new_q - q)) < tol:
            return new_q
        q = new_q
