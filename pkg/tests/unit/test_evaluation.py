"""
Unit tests for the desk-scale evaluation thresholds.
"""

import json
from pathlib import Path

import pytest

from eval.evaluate_pearl import PearlEvaluator
from pearl_ai.schemas.records import TradeoffPoint

SCENARIOS = Path(__file__).resolve().parents[2] / "eval" / "scenarios.json"


@pytest.fixture
def evaluator(tmp_path):
    """Evaluator writing under a temporary directory."""
    return PearlEvaluator(str(tmp_path))


class TestScenarioFile:
    """Shipped scenario definitions."""

    def test_pipelines_known(self, evaluator, mocker):
        """Every scenario names a pipeline the evaluator runs."""
        scenarios = json.loads(SCENARIOS.read_text())
        ids = {s["scenario_id"] for s in scenarios}
        assert {"infeasible_budget", "vr_mi_plateau", "vr_attack_baseline"} <= ids
        mocker.patch.object(evaluator, "load_scenarios", return_value=scenarios)
        for name in ("toy_optimality", "train", "infer_baseline", "mitigation", "tradeoff", "drift",
                     "fallback_rate", "vr_mi_plateau"):
            mocker.patch.object(evaluator, name, return_value={})
        results = evaluator.evaluate_all(str(SCENARIOS))
        assert all("error" not in r["metrics"] for r in results)


class TestChecks:
    """Threshold comparisons."""

    def test_fallback_thresholds(self, evaluator):
        """No eligible cell and a high fallback share pass."""
        scenario = {"thresholds": {"eligible_cells_max": 0, "fallback_rate_min": 0.5}}
        assert evaluator.check(scenario, {"eligible_cells": 0, "fallback_rate": 0.9})
        assert not evaluator.check(scenario, {"eligible_cells": 1, "fallback_rate": 0.9})
        assert not evaluator.check(scenario, {"eligible_cells": 0, "fallback_rate": 0.2})

    def test_plateau_range(self, evaluator):
        """The plateau must fall inside the closed band."""
        scenario = {"thresholds": {"plateau_bits_range": [0.9, 1.7]}}
        assert evaluator.check(scenario, {"plateau_bits": 1.3})
        assert evaluator.check(scenario, {"plateau_bits": 1.7})
        assert not evaluator.check(scenario, {"plateau_bits": 0.5})
        assert not evaluator.check(scenario, {"plateau_bits": 2.1})

    def test_fallback_rate_metrics(self, evaluator, mocker):
        """Sweep points at u=0.95 are reduced to eligible-cell count and mean fallback share."""
        points = [
            TradeoffPoint(human="H1", u=0.95, p=p, seed=0, eligible=[], accuracy=0.5, utility_mean=0.0,
                          utility_std=0.1, infeasible_fraction=share, mean_branch=2.0)
            for p, share in [(0.6, 1.0), (0.9, 0.8)]
        ]
        agent = mocker.Mock()
        agent.cmd_sweep.return_value = (None, points)
        mocker.patch.object(evaluator, "_agent", return_value=agent)
        metrics = evaluator.fallback_rate({"u": 0.95, "p_list": [0.6, 0.9]})
        agent.cmd_sweep.assert_called_once_with([0.95], [0.6, 0.9])
        assert metrics == {"eligible_cells": 0, "fallback_rate": pytest.approx(0.9)}


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
