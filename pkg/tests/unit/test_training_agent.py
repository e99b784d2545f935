"""
Unit tests for the Training Agent.
"""

import numpy as np
import pytest

from pearl_ai.environments.toy import TwoStateMDP, value_iteration
from pearl_ai.models.ee_qnet import EEQNetwork, ReplayBuffer
from pearl_ai.schemas.budgets import NetworkConfig, QTrainConfig
from pearl_ai.schemas.records import BranchScore
from pearl_ai.sub_agents.training_agent import TrainingAgent, best_utility_branch


@pytest.fixture
def train_config():
    """Short schedule that solves the two-state MDP."""
    return QTrainConfig(
        gamma=0.5,
        epsilon_start=1.0,
        epsilon_end=0.05,
        epsilon_decay_fraction=0.5,
        batch_size=16,
        target_sync_interval=100,
        steps_per_layer=3000,
        replay_capacity=2000,
        learning_rate=1e-2,
        optimizer="adam",
    )


@pytest.fixture
def trainer(train_config):
    """Trainer with a small network."""
    return TrainingAgent(train_config, NetworkConfig(n_layers=2, trunk_width=16, head_width=8))


@pytest.fixture
def trained(trainer):
    """Two-stage network trained on the toy MDP."""
    env = TwoStateMDP(np.random.default_rng(0))
    return trainer.train_phase1(env, seed=0), env


class TestEpsilon:
    """Exploration schedule."""

    def test_linear_decay(self, train_config):
        """Epsilon falls linearly and then stays at its floor."""
        assert train_config.epsilon_at(0) == 1.0
        assert train_config.epsilon_at(750) == pytest.approx(0.525)
        assert train_config.epsilon_at(1500) == 0.05
        assert train_config.epsilon_at(2999) == 0.05


class TestPhase1:
    """Sequential stage training."""

    def test_learns_optimal_policy(self, trained):
        """Every branch picks the action that matches the state."""
        net, _ = trained
        optimal = value_iteration(0.5).argmax(axis=1)
        for branch in range(net.n_branches):
            for state in range(2):
                obs = np.eye(2)[state]
                assert int(np.argmax(net.q_values(obs, branch))) == optimal[state]

    def test_history(self, trainer, trained):
        """Per-episode rows cover both stages."""
        frame = trainer.history_frame()
        assert list(frame.columns) == ["step", "layer_stage", "epsilon", "loss", "episode_return"]
        assert set(frame["layer_stage"]) == {1, 2}
        assert frame["step"].is_monotonic_increasing

    def test_deterministic(self, train_config):
        """Same seed, same parameters."""
        cfg = train_config.model_copy(update={"steps_per_layer": 200})
        digests = []
        for _ in range(2):
            agent = TrainingAgent(cfg, NetworkConfig(n_layers=2, trunk_width=8, head_width=4))
            digests.append(agent.train_phase1(TwoStateMDP(np.random.default_rng(3)), seed=5).parameter_digest())
        assert digests[0] == digests[1]

    def test_earlier_stages_frozen(self, train_config, monkeypatch):
        """Stage parameters never change once later stages start training."""
        snapshots = []
        original = EEQNetwork.add_layer

        def recording(self, rng):
            snapshots.append([self.stage_digest(s) for s in range(self.n_branches)])
            return original(self, rng)

        monkeypatch.setattr(EEQNetwork, "add_layer", recording)
        cfg = train_config.model_copy(update={"steps_per_layer": 300})
        agent = TrainingAgent(cfg, NetworkConfig(n_layers=4, trunk_width=8, head_width=4))
        net = agent.train_phase1(TwoStateMDP(np.random.default_rng(0)), seed=2)
        final = [net.stage_digest(s) for s in range(4)]
        assert len(snapshots) == 4
        for i, snapshot in enumerate(snapshots):
            assert snapshot == final[:i]

    def test_invalid_layer_count(self, trainer):
        """At least one stage is required."""
        with pytest.raises(ValueError):
            trainer.train_phase1(TwoStateMDP(np.random.default_rng(0)), n_layers=0)


class TestBranchScores:
    """Forced-branch evaluation."""

    def test_scores(self, trained, trainer):
        """Optimal branches earn reward every step and leave the env untouched."""
        net, env = trained
        env.reset()
        before = env.state
        scores = trainer.branch_utility_scores(net, env, 48)
        assert [s.branch for s in scores] == [0, 1]
        assert all(s.score == pytest.approx(1.0) for s in scores)
        assert all(s.mi_bits == pytest.approx(1.0) for s in scores)
        assert env.state == before

    def test_best_branch_ties_low(self):
        """Ties go to the lower index."""
        assert best_utility_branch([0.5, 0.9, 0.9]) == 1
        record = BranchScore(branch=0, score=3.0, utility_mean=0.0, utility_std=0.0)
        assert best_utility_branch([record]) == 0
        with pytest.raises(ValueError):
            best_utility_branch([])


class TestFineTune:
    """Retraining from collected transitions."""

    def test_fine_tune_keeps_policy(self, trained, trainer):
        """Fine-tuning on on-policy data preserves the optimal actions."""
        net, _ = trained
        replay = ReplayBuffer(200, 2, np.random.default_rng(0))
        for i in range(200):
            s = i % 2
            replay.push(np.eye(2)[s], s, 1.0, np.eye(2)[1 - s], False)
            replay.push(np.eye(2)[s], 1 - s, 0.0, np.eye(2)[1 - s], False)
        tuned = trainer.fine_tune(net, replay, 400, seed=1)
        for state in range(2):
            assert int(np.argmax(tuned.q_values(np.eye(2)[state], 1))) == state

    def test_empty_replay(self, trained, trainer):
        """Nothing to learn from is an error."""
        net, _ = trained
        with pytest.raises(ValueError):
            trainer.fine_tune(net, ReplayBuffer(4, 2, np.random.default_rng(0)), 10)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
