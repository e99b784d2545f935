"""
Unit tests for the Confidence Agent.
"""

import numpy as np
import pytest

from pearl_ai.environments.toy import TwoStateMDP
from pearl_ai.models.ee_qnet import EEQNetwork
from pearl_ai.schemas.budgets import BudgetConfig, MIWindowConfig
from pearl_ai.schemas.records import PrivacyLabelRecord, UtilityLabelRecord
from pearl_ai.sub_agents.confidence_agent import (
    ConfidenceAgent,
    ConfidenceBuffers,
    eligibility_table,
    privacy_labels,
    utility_labels,
)


@pytest.fixture
def net():
    """Two-branch network on the toy MDP."""
    rng = np.random.default_rng(3)
    network = EEQNetwork(state_dim=2, action_count=2, trunk_width=8, head_width=8)
    network.add_layer(rng)
    network.add_layer(rng)
    return network


@pytest.fixture
def agent():
    """Confidence agent with a short, fast training schedule."""
    return ConfidenceAgent(epochs=100, learning_rate=1e-2, batch_size=16, holdout=0.2)


class TestLabels:
    """Utility and privacy label rules."""

    def test_utility_positive_q(self):
        """Branches reaching u * Q_max are labelled 1."""
        assert utility_labels([1.0, 0.7, 0.8], 0.75).tolist() == [1, 0, 1]

    def test_utility_non_positive_q(self):
        """With Q_max <= 0 the threshold widens below Q_max."""
        assert utility_labels([-1.0, -1.2, -1.5], 0.75).tolist() == [1, 1, 0]

    def test_utility_best_branch_always_eligible(self):
        """The argmax branch always satisfies its own budget."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            q = rng.normal(size=5)
            assert utility_labels(q, 1.0)[int(np.argmax(q))] == 1

    def test_utility_monotone_in_u(self):
        """Loosening u never removes eligibility."""
        q = [2.0, 1.5, 1.0, 0.5]
        tight = utility_labels(q, 0.9)
        loose = utility_labels(q, 0.5)
        assert np.all(loose >= tight)

    def test_privacy_labels(self):
        """Branches below p * I_max are labelled 1."""
        assert privacy_labels([0.5, 1.0, 0.69], 0.7, 1.0).tolist() == [1, 0, 1]

    def test_privacy_no_leakage(self):
        """Zero I_max labels every branch private."""
        assert privacy_labels([0.0, 0.0], 0.5, 0.0).tolist() == [1, 1]

    def test_privacy_monotone_in_p(self):
        """Loosening p never removes eligibility."""
        mi = [0.2, 0.4, 0.6, 0.8]
        assert np.all(privacy_labels(mi, 0.9, 1.0) >= privacy_labels(mi, 0.5, 1.0))

    def test_budget_out_of_range(self):
        """Budgets outside (0, 1] are rejected."""
        with pytest.raises(ValueError):
            utility_labels([1.0], 0.0)
        with pytest.raises(ValueError):
            privacy_labels([0.1], 1.5, 1.0)

    def test_negative_mi_rejected(self):
        """Mutual information cannot be negative."""
        with pytest.raises(ValueError):
            privacy_labels([-0.1], 0.5, 1.0)


def reference_utility_labels(q, u):
    """Plain-loop evaluation of the utility rule."""
    q_max = max(q)
    threshold = u * q_max if q_max > 0 else q_max - (1.0 - u) * abs(q_max)
    return [1 if value >= threshold else 0 for value in q]


def reference_privacy_labels(mi, p, mi_max):
    """Plain-loop evaluation of the privacy rule."""
    if mi_max == 0:
        return [1] * len(mi)
    return [1 if value < p * mi_max else 0 for value in mi]


class TestLabelExamples:
    """Documented label values and edge cases."""

    def test_utility_example(self):
        """Q=[10, 7, 9.6] at u=0.95 keeps branches 1 and 3."""
        assert utility_labels([10.0, 7.0, 9.6], 0.95).tolist() == [1, 0, 1]

    def test_utility_one_hot_at_full_budget(self):
        """u=1 with a unique maximum keeps only the argmax."""
        assert utility_labels([0.3, 2.5, 1.1, 2.4], 1.0).tolist() == [0, 1, 0, 0]

    def test_utility_all_non_positive(self):
        """Q_max <= 0 uses the widened threshold; Q_max = 0 keeps only zeros."""
        assert utility_labels([-2.0, -2.4, -3.0], 0.8).tolist() == [1, 1, 0]
        assert utility_labels([0.0, -0.1], 0.5).tolist() == [1, 0]

    def test_privacy_example(self):
        """I=[1.2, 0.6, 0.9], I_max=1.2, p=0.7 keeps only branch 2."""
        assert privacy_labels([1.2, 0.6, 0.9], 0.7, 1.2).tolist() == [0, 1, 0]

    def test_privacy_full_budget_strict(self):
        """At p=1 the branch holding the maximum is still labelled 0."""
        assert privacy_labels([1.2, 0.6, 1.19], 1.0, 1.2).tolist() == [0, 1, 1]

    def test_privacy_zero_max_all_ones(self):
        """No observed leakage labels every branch private."""
        assert privacy_labels([0.0, 0.0, 0.0], 0.3, 0.0).tolist() == [1, 1, 1]

    @pytest.mark.parametrize("scale", [0.25, 2.0, 1024.0])
    def test_scale_invariance(self, scale):
        """Multiplying Q or (I, I_max) by a positive constant leaves labels unchanged."""
        rng = np.random.default_rng(11)
        for _ in range(200):
            q = rng.normal(size=6)
            u = 1.0 - rng.random()
            assert utility_labels(scale * q, u).tolist() == utility_labels(q, u).tolist()
            mi = rng.random(6)
            mi_max = mi.max() * (1.0 + rng.random())
            p = 1.0 - rng.random()
            assert privacy_labels(scale * mi, p, scale * mi_max).tolist() == privacy_labels(mi, p, mi_max).tolist()


class TestLabelReference:
    """Randomized agreement with the plain-loop reference rules."""

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_utility_matches_reference(self, seed):
        """2,500 random Q vectors per seed, including all-negative ones."""
        rng = np.random.default_rng(seed)
        for _ in range(2500):
            b = int(rng.integers(1, 13))
            q = rng.normal(size=b) * rng.choice([0.1, 1.0, 50.0])
            if rng.random() < 0.25:
                q = -np.abs(q)
            u = 1.0 - rng.random()
            assert utility_labels(q, u).tolist() == reference_utility_labels(q.tolist(), u)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_privacy_matches_reference(self, seed):
        """2,500 random MI vectors per seed, including the no-leakage case."""
        rng = np.random.default_rng(100 + seed)
        for _ in range(2500):
            b = int(rng.integers(1, 13))
            if rng.random() < 0.1:
                mi, mi_max = np.zeros(b), 0.0
            else:
                mi = rng.random(b) * 2.0
                mi_max = float(mi.max()) * (1.0 + rng.random())
            p = 1.0 - rng.random()
            assert privacy_labels(mi, p, mi_max).tolist() == reference_privacy_labels(mi.tolist(), p, mi_max)


class TestBuffers:
    """Phase-2 buffer construction."""

    def test_build_buffers(self, net, agent):
        """Every step yields a utility record and every complete window privacy records."""
        env = TwoStateMDP(np.random.default_rng(1))
        buffers = agent.build_buffers(
            net, env, MIWindowConfig(window_n=10), BudgetConfig(u=0.75, p=0.7), 35, np.random.default_rng(2)
        )
        assert len(buffers.utility) == 35
        assert len(buffers.privacy) == 30
        assert {r.window for r in buffers.privacy} == {0, 1, 2}
        assert all(len(r.ucl) == 2 and len(r.pcl) == 2 for r in buffers.privacy + buffers.utility)
        assert len(buffers.mi.points) == 3 * 2
        assert buffers.mi.i_max == max(pt.i_bits for pt in buffers.mi.points)

    def test_window_labels_shared(self, net, agent):
        """All pairs of one window carry the same privacy labels."""
        env = TwoStateMDP(np.random.default_rng(1))
        buffers = agent.build_buffers(
            net, env, MIWindowConfig(window_n=10), BudgetConfig(), 20, np.random.default_rng(2)
        )
        first = [tuple(r.pcl) for r in buffers.privacy if r.window == 0]
        assert len(set(first)) == 1

    def test_too_few_steps(self, net, agent):
        """Phase 2 must cover at least one window."""
        env = TwoStateMDP(np.random.default_rng(1))
        with pytest.raises(ValueError):
            agent.build_buffers(net, env, MIWindowConfig(window_n=10), BudgetConfig(), 5, np.random.default_rng(0))

    def test_eligible_branches_majority(self):
        """A branch is eligible when both labels hold for a majority of records."""
        buffers = ConfidenceBuffers(
            utility=[UtilityLabelRecord(s=[0.0], a=0, ucl=[1, 1], q_max=[1.0, 1.0])] * 3,
            privacy=[PrivacyLabelRecord(s=[0.0], a=0, pcl=[0, 1], window=0)] * 3,
        )
        assert buffers.eligible_branches() == [1]

    def test_frames(self, net, agent):
        """CSV frames expose one label column per branch."""
        env = TwoStateMDP(np.random.default_rng(1))
        buffers = agent.build_buffers(net, env, MIWindowConfig(window_n=10), BudgetConfig(), 10, np.random.default_rng(2))
        frames = buffers.to_frames()
        assert {"s0", "s1", "a", "ucl1", "ucl2"} <= set(frames["utility"].columns)
        assert {"pcl1", "pcl2", "window"} <= set(frames["privacy"].columns)


class TestHeadTraining:
    """Sigmoid head fitting."""

    def test_heads_learn_separable_labels(self, net, agent):
        """Labels determined by the state are learned almost perfectly."""
        rng = np.random.default_rng(4)
        states = [[1.0, 0.0], [0.0, 1.0]]
        utility, privacy = [], []
        for i in range(200):
            s = states[i % 2]
            label = [1 - i % 2, i % 2]
            utility.append(UtilityLabelRecord(s=s, a=i % 2, ucl=label, q_max=[1.0, 1.0]))
            privacy.append(PrivacyLabelRecord(s=s, a=i % 2, pcl=label[::-1], window=i // 20))
        buffers = ConfidenceBuffers(utility=utility, privacy=privacy)
        before = net.parameter_digest([layer.name for layer in net.q_layers()])
        agent.train_confidence_heads(net, buffers, rng)
        assert net.has_heads
        assert net.parameter_digest([layer.name for layer in net.q_layers()]) == before
        for report in agent.last_report.values():
            assert report["utility_accuracy"] >= 0.95
            assert report["privacy_accuracy"] >= 0.95

    def test_epoch_override_is_per_call(self, net, agent, mocker):
        """An explicit epoch count applies to that call only."""
        buffers = ConfidenceBuffers(
            utility=[UtilityLabelRecord(s=[1.0, 0.0], a=0, ucl=[1, 0], q_max=[1.0, 1.0])] * 10,
            privacy=[PrivacyLabelRecord(s=[1.0, 0.0], a=0, pcl=[0, 1], window=0)] * 10,
        )
        spy = mocker.spy(agent, "_train_head")
        agent.train_confidence_heads(net, buffers, np.random.default_rng(0), epochs=3)
        assert agent.epochs == 100
        assert [c.args[-1] for c in spy.call_args_list] == [3] * 2 * net.n_branches
        agent.train_confidence_heads(net, buffers, np.random.default_rng(0))
        assert [c.args[-1] for c in spy.call_args_list[2 * net.n_branches:]] == [100] * 2 * net.n_branches

    def test_empty_buffers_rejected(self, net, agent):
        """Heads cannot be trained without data."""
        with pytest.raises(ValueError):
            agent.train_confidence_heads(net, ConfidenceBuffers(), np.random.default_rng(0))


class TestEligibilityTable:
    """Budget table rendering."""

    def test_cells(self):
        """Rows are p, columns are u, cells list one-based layers."""
        table = eligibility_table({(0.55, 0.6): [0, 5], (0.75, 0.6): [], (0.55, 0.9): [2]})
        assert table.loc[0.6, 0.55] == "L1,6"
        assert table.loc[0.6, 0.75] == "×"
        assert table.loc[0.9, 0.55] == "L3"
        assert table.loc[0.9, 0.75] == ""


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
