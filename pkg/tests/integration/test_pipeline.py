"""
Integration tests for the thermal and VR pipelines.
Small configurations that exercise every stage on the real simulators.
"""

import json

import numpy as np
import pandas as pd
import pytest

from pearl_ai.agent import PearlMainAgent
from pearl_ai.models.ee_qnet import EEQNetwork
from pearl_ai.schemas.budgets import (
    BudgetConfig,
    EnvKind,
    ExperimentConfig,
    MIWindowConfig,
    NetworkConfig,
    QTrainConfig,
    RuntimeConfig,
)
from pearl_ai.sub_agents.runtime_agent import VariabilityMonitor


def small_config(env, human, output_dir, window, **runtime):
    """Fast experiment on a real environment."""
    return ExperimentConfig(
        env=env,
        human=human,
        seed=1,
        network=NetworkConfig(n_layers=2, trunk_width=16, head_width=8),
        training=QTrainConfig(
            steps_per_layer=200,
            batch_size=16,
            target_sync_interval=50,
            replay_capacity=1000,
            learning_rate=1e-3,
        ),
        budgets=BudgetConfig(u=0.75, p=0.7, v=0.8),
        privacy=MIWindowConfig(window_n=window, bias_correction=False),
        runtime=RuntimeConfig(phase2_steps=2 * window, head_epochs=3, eval_steps=window, **runtime),
        output_dir=str(output_dir),
    )


@pytest.fixture
def thermal_agent(tmp_path):
    """Thermal house experiment for H1."""
    return PearlMainAgent(small_config(EnvKind.THERMAL, "H1", tmp_path, 24, days=3, k_max=4))


@pytest.fixture
def vr_agent(tmp_path):
    """VR drift experiment starting from the low-tolerance learner."""
    return PearlMainAgent(
        small_config(
            EnvKind.VR,
            "P3",
            tmp_path,
            25,
            days=10,
            k_max=4,
            drift_days_before=20,
            drift_days_after=20,
            retrain_updates=20,
        )
    )


class TestThermalPipeline:
    """Training and inference on the thermal house."""

    def test_train_checkpoint_metadata(self, thermal_agent):
        """The checkpoint records budgets, I_max and the best branch."""
        net = EEQNetwork.load(thermal_agent.cmd_train())
        assert net.n_branches == 2
        assert net.has_heads
        meta = net.metadata
        assert meta["env"] == "thermal"
        assert meta["budgets"] == {"u": 0.75, "p": 0.7}
        assert meta["best_branch"] in (0, 1)
        assert meta["i_max"] >= 0.0

    def test_mi_series_binnings(self, thermal_agent):
        """The best branch is measured under full and coarse binning."""
        run_dir = thermal_agent.cmd_train().parent
        mi = pd.read_csv(run_dir / "mi_series.csv")
        assert set(mi["source"]) == {"phase2", "best_branch"}
        assert set(mi.loc[mi["source"] == "best_branch", "binning"]) == {"full", "coarse"}
        assert (mi["I_bits"] >= 0).all()

    def test_infer_trace(self, thermal_agent):
        """Served setpoints stay in range and the trace is complete."""
        trace = thermal_agent.cmd_infer()
        frame = trace.to_frame()
        assert len(frame) == 3 * 24
        assert frame["a_value"].between(60, 80).all()
        assert frame["t"].tolist() == list(range(72))
        truth = thermal_agent.tools_for("infer").read_csv("ground_truth.csv")
        assert truth["truth"].between(0, 5).all()


class TestDriftScenario:
    """Behaviour switch under the variability monitor."""

    def test_switch_and_control(self, vr_agent):
        """Both runs write a drift report with one MI value per window."""
        report = vr_agent.cmd_drift()
        assert report.switch_day == 20.0
        assert len(report.mi_curve) == (40 * 5) // 25
        assert all(t > 0 for t in report.trigger_days)
        stored = json.loads(vr_agent.tools_for("drift").path("drift.json").read_text())
        assert stored["switch_day"] == 20.0

        control = vr_agent.cmd_drift(control=True)
        assert control.switch_day is None
        assert len(control.mi_curve) == len(report.mi_curve)

    def test_retrain_replaces_network(self, vr_agent, mocker):
        """A trigger leads to exactly one retrain and a fresh network."""
        net, _ = vr_agent.load_or_train()
        spy = mocker.spy(vr_agent.trainer, "fine_tune")
        monitor = VariabilityMonitor(0.8, 1e6, net.state_dim, np.random.default_rng(0), replay_capacity=500)
        env = vr_agent._new_env("drift-test")

        def retrain(current, replay):
            return vr_agent.trainer.fine_tune(current.copy(), replay, 10, seed=0)

        final, trace, triggers = vr_agent.runtime_agent.monitor_and_retrain(
            net, env, monitor, vr_agent.config.budgets, vr_agent.config.privacy, 75, retrain
        )
        assert triggers == [24]
        assert spy.call_count == 1
        assert final is not net
        assert len(trace) == 75


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
