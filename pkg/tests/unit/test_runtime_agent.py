"""
Unit tests for the Runtime Agent and the variability monitor.
"""

import numpy as np
import pytest

from pearl_ai.environments.toy import TwoStateMDP
from pearl_ai.models.ee_qnet import EEQNetwork
from pearl_ai.schemas.budgets import BudgetConfig, MIWindowConfig
from pearl_ai.sub_agents.runtime_agent import (
    RetrainState,
    RuntimeAgent,
    VariabilityMonitor,
    fallback_exit,
)
from pearl_ai.utils.validators import InfeasibleExitError


@pytest.fixture
def net():
    """Three-branch network on the toy MDP."""
    rng = np.random.default_rng(11)
    network = EEQNetwork(state_dim=2, action_count=2, trunk_width=8, head_width=8)
    for _ in range(3):
        network.add_layer(rng)
    return network


@pytest.fixture
def agent():
    """Runtime agent with the 0.5 decision threshold."""
    return RuntimeAgent(threshold=0.5)


@pytest.fixture
def monitor():
    """Monitor with v = 0.8 and a pre-set I_max of 1 bit."""
    return VariabilityMonitor(0.8, 1.0, state_dim=2, rng=np.random.default_rng(0), replay_capacity=100)


def confidences(greedy, u, p):
    """Tuple in the shape returned by EEQNetwork.confidence."""
    return np.array(greedy), np.array(u, dtype=float), np.array(p, dtype=float)


class TestExitSelection:
    """Budgeted exit choice."""

    def test_lowest_eligible_branch(self, net, agent, mocker):
        """The earliest branch with both heads above threshold wins."""
        mocker.patch.object(net, "confidence", return_value=confidences([0, 1, 0], [0.9, 0.8, 0.9], [0.2, 0.7, 0.9]))
        decision = agent.select_exit(net, np.zeros(2), BudgetConfig())
        assert decision.branch == 1
        assert decision.action == 1
        assert decision.feasible

    def test_infeasible_raises(self, net, agent, mocker):
        """No jointly eligible branch raises with the scores attached."""
        mocker.patch.object(net, "confidence", return_value=confidences([0, 1, 0], [0.9, 0.1, 0.2], [0.1, 0.9, 0.3]))
        with pytest.raises(InfeasibleExitError) as exc:
            agent.select_exit(net, np.zeros(2), BudgetConfig())
        assert exc.value.utility_scores.tolist() == [0.9, 0.1, 0.2]

    def test_decide_applies_fallback(self, net, agent, mocker):
        """The fallback keeps utility and maximizes privacy."""
        mocker.patch.object(net, "confidence", return_value=confidences([0, 1, 1], [0.9, 0.1, 0.7], [0.1, 0.9, 0.3]))
        decision = agent.decide(net, np.zeros(2), BudgetConfig())
        assert decision.branch == 2
        assert decision.action == 1
        assert not decision.feasible
        assert decision.ucl_ok and not decision.pcl_ok

    def test_fallback_without_utility(self):
        """With no utility-eligible branch the most private one is used."""
        assert fallback_exit(np.array([0.1, 0.2]), np.array([0.3, 0.4])) == 1

    def test_forced_branch_trace(self, net, agent):
        """Forcing a branch serves its greedy action every step."""
        env = TwoStateMDP(np.random.default_rng(0))
        trace = agent.run_policy(net, env, BudgetConfig(), 30, forced_branch=2)
        assert len(trace) == 30
        assert {e.branch for e in trace.entries} == {2}
        assert all(e.feasible for e in trace.entries)
        assert [e.t for e in trace.entries] == list(range(30))

    def test_run_policy_resets_environment(self, net, agent, mocker):
        """Serving starts from a fresh episode."""
        env = TwoStateMDP(np.random.default_rng(0))
        spy = mocker.spy(env, "reset")
        agent.run_policy(net, env, BudgetConfig(), 5, forced_branch=0)
        assert spy.call_count == 1

    def test_run_policy_rejects_zero_steps(self, net, agent):
        """At least one decision is required."""
        with pytest.raises(ValueError):
            agent.run_policy(net, TwoStateMDP(np.random.default_rng(0)), BudgetConfig(), 0, forced_branch=0)


class TestVariabilityMonitor:
    """Trigger predicate and retrain state."""

    def test_trigger_below_threshold(self, monitor):
        """Only MI strictly below v * I_max triggers."""
        assert monitor.threshold == pytest.approx(0.8)
        assert not monitor.observe(0.8)
        assert monitor.observe(0.79)

    def test_running_maximum(self, monitor):
        """Higher windows raise I_max."""
        monitor.observe(1.5)
        assert monitor.i_max == 1.5
        assert monitor.observe(1.1)

    def test_calibration(self):
        """Without I_max the first window calibrates."""
        mon = VariabilityMonitor(0.8, None, 2, np.random.default_rng(0), replay_capacity=10)
        assert not mon.observe(0.4)
        assert mon.i_max == 0.4

    def test_coalescing(self, monitor):
        """Triggers during a retrain are counted, not fired."""
        monitor.begin_retrain()
        assert not monitor.observe(0.1)
        assert not monitor.observe(0.1)
        assert monitor.coalesced == 2
        monitor.finish_retrain()
        assert monitor.state == RetrainState.STABLE
        assert monitor.i_max is None


class TestMonitorAndRetrain:
    """Serving loop with drift detection."""

    def test_switch_triggers_one_retrain(self, agent, mocker):
        """A behaviour change fires one trigger, coalesces the next and recalibrates."""
        policy = {"leaky": True}

        def confidence(obs):
            state = int(np.argmax(obs))
            action = state if policy["leaky"] else 0
            return confidences([action, action], [0.9, 0.9], [0.9, 0.9])

        net = mocker.Mock()
        net.n_branches = 2
        net.confidence.side_effect = confidence

        def retrain(current, replay):
            policy["leaky"] = True
            return current

        retrain_spy = mocker.Mock(side_effect=retrain)
        mon = VariabilityMonitor(0.8, None, 2, np.random.default_rng(0), replay_capacity=1000)
        env = TwoStateMDP(np.random.default_rng(5))
        events = {40: lambda: policy.update(leaky=False)}

        final, trace, triggers = agent.monitor_and_retrain(
            net, env, mon, BudgetConfig(), MIWindowConfig(window_n=10, bias_correction=False), 100, retrain_spy,
            events=events,
        )
        assert final is net
        assert triggers == [49]
        assert mon.coalesced == 1
        assert mon.retrained_at == [59]
        assert retrain_spy.call_count == 1
        assert len(mon.replay) == 100
        assert len(trace) == 100
        assert trace.entries[49].trigger
        assert trace.entries[9].i_current == pytest.approx(1.0)
        assert trace.entries[69].i_current == pytest.approx(1.0)
        assert mon.i_max == pytest.approx(1.0)

    def test_exit_switch_without_drift(self, agent, mocker):
        """Serving a different exit while the human is unchanged does not trigger."""
        heads = {"first_private": False}

        def confidence(obs):
            state = int(np.argmax(obs))
            p = [0.9, 0.9] if heads["first_private"] else [0.1, 0.9]
            return confidences([0, state], [0.9, 0.9], p)

        net = mocker.Mock()
        net.n_branches = 2
        net.confidence.side_effect = confidence
        retrain = mocker.Mock(side_effect=lambda current, replay: current)
        mon = VariabilityMonitor(0.8, None, 2, np.random.default_rng(0), replay_capacity=1000)
        env = TwoStateMDP(np.random.default_rng(5))

        _, trace, triggers = agent.monitor_and_retrain(
            net, env, mon, BudgetConfig(), MIWindowConfig(window_n=10, bias_correction=False), 100, retrain,
            events={40: lambda: heads.update(first_private=True)},
        )
        assert {e.branch for e in trace.entries[:40]} == {1}
        assert {e.branch for e in trace.entries[40:]} == {0}
        assert mon.branch == 1
        assert triggers == []
        assert retrain.call_count == 0
        assert all(e.i_current == pytest.approx(1.0) for e in trace.entries if e.i_current is not None)

    def test_monitored_branch_resets_after_retrain(self, monitor):
        """The monitored exit is fixed at calibration and cleared by a retrain."""
        assert monitor.monitored_branch([2, 2, 0, 1]) == 2
        assert monitor.monitored_branch([0, 0, 0]) == 2
        monitor.begin_retrain()
        monitor.finish_retrain()
        assert monitor.branch is None
        assert monitor.monitored_branch([0, 1, 1]) == 1


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
