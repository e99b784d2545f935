"""
Evaluation script for PEaRL.
Runs the desk-scale scenarios and checks them against their thresholds.
"""

import argparse
import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
from loguru import logger

from pearl_ai.agent import PearlMainAgent
from pearl_ai.environments.toy import value_iteration
from pearl_ai.schemas.budgets import ExperimentConfig
from pearl_ai.utils.helpers import configure_logging, spearman_rho


class PearlEvaluator:
    """Evaluates a trained pipeline against the scenario thresholds."""

    def __init__(self, output_dir: str = "runs/eval"):
        """Initialize the evaluator."""
        self.output_dir = output_dir
        self.results: List[Dict[str, Any]] = []

    def load_scenarios(self, file_path: str) -> List[Dict[str, Any]]:
        """Load scenarios from JSON file."""
        logger.info(f"Loading scenarios from {file_path}")
        path = Path(file_path)
        if not path.exists():
            logger.error(f"Scenario file not found: {file_path}")
            return []
        with open(path, "r") as f:
            scenarios = json.load(f)
        logger.info(f"Loaded {len(scenarios)} scenarios")
        return scenarios

    def _agent(self, scenario: Dict[str, Any], **extra: Any) -> PearlMainAgent:
        overrides = {"output_dir": self.output_dir, **scenario.get("overrides", {}), **extra}
        return PearlMainAgent(ExperimentConfig.from_yaml(Path(scenario["config"]), overrides))

    def toy_optimality(self, scenario: Dict[str, Any]) -> Dict[str, float]:
        agent = self._agent(scenario)
        net, _ = agent.load_or_train()
        optimal = value_iteration(agent.config.training.gamma).argmax(axis=1)
        states = np.eye(2)
        agree = [
            float(np.array_equal(net.q_values(states, b).argmax(axis=1), optimal)) for b in range(net.n_branches)
        ]
        return {"branch_agreement": float(np.mean(agree))}

    def train(self, scenario: Dict[str, Any]) -> Dict[str, float]:
        agent = self._agent(scenario)
        net, _ = agent.load_or_train()
        scores = agent.tools_for("train").read_csv("branch_scores.csv")
        best = int(net.metadata["best_branch"])
        return {"best_in_range_pct": float(scores.loc[best, "in_range_pct"]), "best_branch": best + 1}

    def infer_baseline(self, scenario: Dict[str, Any]) -> Dict[str, float]:
        agent = self._agent(scenario)
        agent.cmd_infer(branch="best")
        clustering = agent.tools_for("infer-baseline").read_json("clustering.json")
        return {"k_selected": clustering["k_selected"], "accuracy": clustering["accuracy"]}

    def mitigation(self, scenario: Dict[str, Any]) -> Dict[str, float]:
        agent = self._agent(scenario)
        agent.cmd_infer(branch="best")
        agent.cmd_infer()
        base = agent.tools_for("infer-baseline").read_json("inference.json")
        mitigated = agent.tools_for("infer").read_json("inference.json")
        return {
            "accuracy_drop": base["accuracy"] - mitigated["accuracy"],
            "utility_drop": base["utility"]["score"] - mitigated["utility"]["score"],
        }

    def tradeoff(self, scenario: Dict[str, Any]) -> Dict[str, float]:
        acc_rho, std_rho = [], []
        for seed in scenario.get("seeds", [0]):
            agent = self._agent(scenario, seed=seed)
            _, points = agent.cmd_sweep(scenario["u_list"], scenario["p_list"])
            points = sorted(points, key=lambda pt: pt.u)
            us = [pt.u for pt in points]
            acc_rho.append(spearman_rho(us, [pt.accuracy for pt in points]))
            std_rho.append(spearman_rho(us, [pt.utility_std for pt in points]))
        return {"accuracy_rho": float(np.mean(acc_rho)), "utility_std_rho": float(np.mean(std_rho))}

    def drift(self, scenario: Dict[str, Any], control: bool = False) -> Dict[str, float]:
        report = self._agent(scenario).cmd_drift(control=control)
        metrics = {"triggers": len(report.trigger_days), "recovery_days": report.recovery_days}
        if report.switch_day is not None:
            before = [p["i_bits"] for p in report.mi_curve if p["day"] <= report.switch_day]
            after = [p["i_bits"] for p in report.mi_curve if p["day"] > report.switch_day]
            if before and after and max(before) > 0:
                metrics["mi_drop"] = 1.0 - min(after) / max(before)
        return metrics

    def fallback_rate(self, scenario: Dict[str, Any]) -> Dict[str, float]:
        agent = self._agent(scenario)
        _, points = agent.cmd_sweep([scenario.get("u", 0.95)], scenario["p_list"])
        return {
            "eligible_cells": sum(1 for pt in points if pt.eligible),
            "fallback_rate": float(np.mean([pt.infeasible_fraction for pt in points])),
        }

    def vr_mi_plateau(self, scenario: Dict[str, Any]) -> Dict[str, float]:
        agent = self._agent(scenario)
        net, _ = agent.load_or_train()
        series = agent.tools_for("train").read_csv("mi_series.csv")
        best = series[series["source"] == "best_branch"]["I_bits"].to_numpy()
        tail = best[len(best) // 2:]
        return {"plateau_bits": float(tail.mean()) if tail.size else 0.0, "best_branch": int(net.metadata["best_branch"]) + 1}

    def check(self, scenario: Dict[str, Any], metrics: Dict[str, Any]) -> bool:
        """Compare metrics with the scenario thresholds."""
        t = scenario.get("thresholds", {})
        checks = []
        if "branch_agreement_min" in t:
            checks.append(metrics["branch_agreement"] >= t["branch_agreement_min"])
        if "best_in_range_pct_min" in t:
            checks.append(metrics["best_in_range_pct"] >= t["best_in_range_pct_min"])
        if "k_selected" in t:
            checks.append(metrics["k_selected"] == t["k_selected"])
        if "accuracy_min" in t:
            checks.append(metrics["accuracy"] >= t["accuracy_min"])
        if "accuracy_drop_min" in t:
            checks.append(metrics["accuracy_drop"] >= t["accuracy_drop_min"])
        if "utility_drop_max" in t:
            checks.append(metrics["utility_drop"] <= t["utility_drop_max"])
        if "spearman_abs_min" in t:
            checks.append(metrics["accuracy_rho"] >= t["spearman_abs_min"])
            checks.append(metrics["utility_std_rho"] <= -t["spearman_abs_min"])
        if "triggers" in t:
            checks.append(metrics["triggers"] == t["triggers"])
        if "mi_drop_min" in t:
            checks.append(metrics.get("mi_drop", 0.0) >= t["mi_drop_min"])
        if "recovery_days_max" in t:
            recovery = metrics.get("recovery_days")
            checks.append(recovery is not None and recovery <= t["recovery_days_max"])
        if "eligible_cells_max" in t:
            checks.append(metrics["eligible_cells"] <= t["eligible_cells_max"])
        if "fallback_rate_min" in t:
            checks.append(metrics["fallback_rate"] >= t["fallback_rate_min"])
        if "plateau_bits_range" in t:
            low, high = t["plateau_bits_range"]
            checks.append(low <= metrics["plateau_bits"] <= high)
        return all(checks)

    def evaluate_all(self, scenarios_file: str = "eval/scenarios.json") -> List[Dict[str, Any]]:
        """Run every scenario and record pass/fail."""
        pipelines = {
            "toy_optimality": self.toy_optimality,
            "train": self.train,
            "infer_baseline": self.infer_baseline,
            "mitigation": self.mitigation,
            "tradeoff": self.tradeoff,
            "drift": self.drift,
            "drift_control": lambda s: self.drift(s, control=True),
            "fallback_rate": self.fallback_rate,
            "vr_mi_plateau": self.vr_mi_plateau,
        }
        self.results = []
        for scenario in self.load_scenarios(scenarios_file):
            logger.info(f"Scenario {scenario['scenario_id']}: {scenario['description']}")
            try:
                metrics = pipelines[scenario["pipeline"]](scenario)
                passed = self.check(scenario, metrics)
            except Exception as e:
                logger.error(f"Scenario {scenario['scenario_id']} failed: {e}")
                metrics, passed = {"error": str(e)}, False
            self.results.append({"scenario_id": scenario["scenario_id"], "passed": passed, "metrics": metrics})
            logger.info(f"  {'PASS' if passed else 'FAIL'} {metrics}")
        return self.results

    def save_results(self, output_file: str = "eval/evaluation_results.json") -> None:
        """Save evaluation results to file."""
        with open(output_file, "w") as f:
            json.dump(self.results, f, indent=2, default=str)
        logger.info(f"Results saved to {output_file}")


def main():
    """Run evaluation."""
    parser = argparse.ArgumentParser(description="PEaRL desk-scale evaluation")
    parser.add_argument("--scenarios", default="eval/scenarios.json")
    parser.add_argument("--only", nargs="*", help="Scenario ids to run")
    parser.add_argument("--output-dir", default="runs/eval")
    args = parser.parse_args()

    configure_logging("INFO")
    evaluator = PearlEvaluator(args.output_dir)
    scenarios = evaluator.load_scenarios(args.scenarios)
    if args.only:
        scenarios = [s for s in scenarios if s["scenario_id"] in args.only]
        tmp = Path(args.output_dir) / "selected_scenarios.json"
        tmp.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(json.dumps(scenarios))
        results = evaluator.evaluate_all(str(tmp))
    else:
        results = evaluator.evaluate_all(args.scenarios)

    print("\n=== Evaluation Results ===\n")
    for r in results:
        print(f"{r['scenario_id']:<18} {'PASS' if r['passed'] else 'FAIL'}  {r['metrics']}")
    evaluator.save_results()


if __name__ == "__main__":
    main()
