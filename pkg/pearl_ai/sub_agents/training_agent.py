"""
Training Agent - Sequential early-exit DQN training
Grows the trunk one layer at a time, trains each new exit branch with
deep Q-learning and freezes everything that came before.
"""

from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from ..config import settings
from ..environments.base import Environment
from ..models.ee_qnet import EEQNetwork, ReplayBuffer
from ..models.nn_core import DenseStack, LossKind, Optimizer, ParameterMask
from ..schemas.budgets import NetworkConfig, QTrainConfig
from ..schemas.records import BranchScore
from ..utils.helpers import RandomStreams
from ..utils.privacy_metric import mutual_information_arrays
from ..utils.validators import DivergenceError


class TrainingAgent:
    """
    Phase-1 trainer.

    Holds the optimizer and replay buffer of the last run so that later
    fine-tuning continues from the same state.
    """

    def __init__(self, config: Optional[QTrainConfig] = None, network: Optional[NetworkConfig] = None):
        """Initialize with training and network settings."""
        self.config = config or QTrainConfig()
        self.network = network or NetworkConfig()
        self.optimizer: Optional[Optimizer] = None
        self.replay: Optional[ReplayBuffer] = None
        self.history: List[Dict[str, float]] = []

    def _make_optimizer(self) -> Optimizer:
        return Optimizer(
            kind=self.config.optimizer.value,
            learning_rate=self.config.learning_rate,
            beta1=settings.adam_beta1,
            beta2=settings.adam_beta2,
        )

    def td_update(
        self,
        stack: DenseStack,
        target: DenseStack,
        batch: tuple,
        mask: ParameterMask,
        optimizer: Optimizer,
    ) -> float:
        """
        One TD step: ``y = r + gamma * (1 - done) * max_a' Q_target(s', a')``.

        The squared error is taken on the executed action only.

        Returns:
            Minibatch loss
        """
        states, actions, rewards, next_states, dones = batch
        n = len(actions)
        q_next = target.forward(next_states).max(axis=1)
        y = rewards + self.config.gamma * (1.0 - dones) * q_next
        q_pred = stack.forward(states)
        targets = q_pred.copy()
        targets[np.arange(n), actions] = y
        weights = np.zeros_like(q_pred)
        weights[np.arange(n), actions] = 1.0
        return stack.backward_and_step(states, targets, LossKind.MSE, optimizer, mask, weights)

    def train_phase1(self, env: Environment, n_layers: Optional[int] = None, seed: int = 0) -> EEQNetwork:
        """
        Train an early-exit network stage by stage.

        Stage L adds trunk layer L and branch L, freezes every earlier layer
        and branch, and runs ``steps_per_layer`` epsilon-greedy interactions on
        branch L. The target network is a full copy of the stage's exit path,
        re-synced every ``target_sync_interval`` steps. The replay buffer is
        shared across stages.

        Args:
            env: Environment
            n_layers: Trunk layers (default from the network config)
            seed: Root seed for initialization, exploration and replay sampling

        Returns:
            Trained network
        """
        n_layers = self.network.n_layers if n_layers is None else n_layers
        if n_layers < 1:
            raise ValueError("n_layers must be at least 1")
        cfg = self.config
        streams = RandomStreams(seed)
        init_rng = streams.get("net-init")
        explore = streams.get("exploration")
        scale = cfg.reward_scale if cfg.reward_scale is not None else env.reward_scale

        net = EEQNetwork(env.observation_dim, env.action_count, self.network.trunk_width, self.network.head_width)
        self.replay = ReplayBuffer(cfg.replay_capacity, env.observation_dim, streams.get("replay"))
        self.optimizer = self._make_optimizer()
        self.history = []
        global_step = 0

        logger.info(f"Phase 1: {n_layers} stages x {cfg.steps_per_layer} steps on {type(env).__name__}")
        for stage in range(n_layers):
            net.add_layer(init_rng)
            mask = net.frozen_before(stage)
            stack = net.exit_stack(stage)
            target = stack.copy()
            obs = env.reset()
            episode_return, losses = 0.0, []

            for step in range(cfg.steps_per_layer):
                epsilon = cfg.epsilon_at(step)
                if explore.random() < epsilon:
                    action = int(explore.integers(env.action_count))
                else:
                    action = int(np.argmax(stack.forward(obs)))

                next_obs, reward, done, info = env.step(action)
                self.replay.push(obs, action, reward * scale, next_obs, done)
                episode_return += reward

                if len(self.replay) >= cfg.batch_size:
                    try:
                        losses.append(
                            self.td_update(stack, target, self.replay.sample(cfg.batch_size), mask, self.optimizer)
                        )
                    except DivergenceError as e:
                        e.diagnostics.update({"stage": stage + 1, "step": step, "epsilon": epsilon})
                        logger.error(f"Phase 1 diverged at stage {stage + 1}, step {step}: {e}")
                        raise

                global_step += 1
                if global_step % cfg.target_sync_interval == 0:
                    target = stack.copy()

                last_step = step == cfg.steps_per_layer - 1
                if done or info.get("truncated") or last_step:
                    self.history.append(
                        {
                            "step": global_step,
                            "layer_stage": stage + 1,
                            "epsilon": epsilon,
                            "loss": float(np.mean(losses)) if losses else float("nan"),
                            "episode_return": episode_return,
                        }
                    )
                    episode_return, losses = 0.0, []
                    obs = env.reset()
                else:
                    obs = next_obs

            logger.info(f"Stage {stage + 1}/{n_layers} done; last return {self.history[-1]['episode_return']:.2f}")

        return net

    def history_frame(self) -> pd.DataFrame:
        """Per-episode rows: step, layer_stage, epsilon, loss, episode_return."""
        return pd.DataFrame(self.history, columns=["step", "layer_stage", "epsilon", "loss", "episode_return"])

    def fine_tune(self, net: EEQNetwork, replay: ReplayBuffer, updates: int, seed: int = 0) -> EEQNetwork:
        """
        Retrain trunk and branches from their current weights on stored transitions.

        Updates are spread evenly across stages in order; each stage keeps the
        sequential freezing rule (earlier stages frozen while a later one trains).

        Args:
            net: Network to fine-tune (modified in place)
            replay: Transitions collected while serving
            updates: Total gradient updates
            seed: Seed for minibatch sampling

        Returns:
            The fine-tuned network
        """
        if len(replay) < 1:
            raise ValueError("cannot fine-tune from an empty replay buffer")
        cfg = self.config
        optimizer = self._make_optimizer()
        sample_rng = np.random.default_rng(seed)
        per_stage = max(1, updates // net.n_branches)
        logger.info(f"Fine-tuning {net.n_branches} branches with {per_stage} updates each from {len(replay)} transitions")

        for stage in range(net.n_branches):
            mask = net.frozen_before(stage)
            stack = net.exit_stack(stage)
            target = stack.copy()
            for k in range(per_stage):
                idx = sample_rng.integers(0, len(replay), size=cfg.batch_size)
                batch = (replay.states[idx], replay.actions[idx], replay.rewards[idx], replay.next_states[idx], replay.dones[idx])
                self.td_update(stack, target, batch, mask, optimizer)
                if (k + 1) % cfg.target_sync_interval == 0:
                    target = stack.copy()
        return net

    def branch_utility_scores(
        self,
        net: EEQNetwork,
        env: Environment,
        steps: int,
        binning_coarse: bool = False,
    ) -> List[BranchScore]:
        """
        Evaluate every branch's greedy policy on its own copy of the environment.

        Args:
            net: Trained network
            env: Environment (cloned per branch, never advanced)
            steps: Steps per branch
            binning_coarse: Use coarse state ids for the reported MI

        Returns:
            One BranchScore per branch
        """
        scores = []
        for branch in range(net.n_branches):
            sim = env.clone()
            obs = sim.reset()
            utilities, s_ids, a_ids = [], [], []
            for _ in range(steps):
                action = int(np.argmax(net.q_values(obs, branch)))
                obs, _, done, info = sim.step(action)
                utilities.append(info["utility"])
                s_ids.append(info["s_coarse"] if binning_coarse else info["s_id"])
                a_ids.append(action)
                if done or info.get("truncated"):
                    obs = sim.reset()
            summary = sim.utility_summary(utilities)
            scores.append(
                BranchScore(
                    branch=branch,
                    score=summary["score"],
                    utility_mean=summary["mean"],
                    utility_std=summary["std"],
                    in_range_pct=summary.get("in_range_pct"),
                    mi_bits=mutual_information_arrays(np.array(s_ids), np.array(a_ids)),
                )
            )
        return scores


def best_utility_branch(scores: Sequence[float]) -> int:
    """
    Branch with the highest utility score; ties go to the lower index.

    Args:
        scores: Per-branch utility scores (or BranchScore records)

    Returns:
        Branch index
    """
    values = [s.score if isinstance(s, BranchScore) else float(s) for s in scores]
    if not values:
        raise ValueError("no branch scores to choose from")
    return int(np.argmax(values))
