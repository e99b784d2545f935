"""
PEaRL Main Agent - Orchestrator
Coordinates the sub-agents through the experiment pipelines
(train, sweep, infer, attack, drift, report) and provides the ``pearl`` CLI.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from . import __version__
from .config import settings
from .environments import Environment, make_environment, profile_for
from .models.ee_qnet import EEQNetwork, ReplayBuffer
from .schemas.budgets import BudgetConfig, ClusterFeatures, EnvKind, ExperimentConfig, StateBinning
from .schemas.records import ActionTrace, ClusteringReport, DriftReport, RunReport, TradeoffPoint
from .sub_agents.adversary_agent import AdversaryAgent
from .sub_agents.confidence_agent import ConfidenceAgent, ConfidenceBuffers, eligibility_table
from .sub_agents.runtime_agent import RuntimeAgent, VariabilityMonitor
from .sub_agents.training_agent import TrainingAgent, best_utility_branch
from .tools import CHECKPOINT_NAME, PearlTools, read_table
from .utils.helpers import RandomStreams, configure_logging, format_layers, sha256_file
from .utils.privacy_metric import mi_series, mutual_information_arrays
from .utils.validators import PearlError

DEFAULT_U_LIST = [0.55, 0.65, 0.75, 0.85, 0.95]
DEFAULT_P_LIST = [0.6, 0.7, 0.8, 0.9]
DRIFT_PROFILES = {EnvKind.THERMAL: ("H3", "H1"), EnvKind.VR: ("P3", "P1")}


def elbow_k_max(config: ExperimentConfig) -> int:
    """Largest k on the adversary's WCSS curve."""
    if config.runtime.k_max:
        return config.runtime.k_max
    if config.env == EnvKind.VR:
        return settings.elbow_k_max_vr
    if config.env == EnvKind.THERMAL:
        return settings.elbow_k_max
    return 4


class PearlMainAgent:
    """
    Main orchestrator: owns one experiment configuration and the sub-agents
    that train, label, serve and attack the early-exit network.
    """

    def __init__(self, config: Optional[ExperimentConfig] = None):
        """
        Initialize the orchestrator.

        Args:
            config: Experiment configuration (defaults when omitted)
        """
        self.config = config or ExperimentConfig()
        logger.info(
            f"Initializing PEaRL agent: env={self.config.env.value}, human={self.config.human}, seed={self.config.seed}"
        )
        self.streams = RandomStreams(self.config.seed)
        self.trainer = TrainingAgent(self.config.training, self.config.network)
        self.confidence_agent = ConfidenceAgent(
            epochs=self.config.runtime.head_epochs,
            learning_rate=self.config.runtime.head_learning_rate,
        )
        self.runtime_agent = RuntimeAgent()
        self.adversary = AdversaryAgent(k_max=elbow_k_max(self.config), seed=self.streams.child_seed("adversary"))

    # ------------------------------------------------------------------
    # helpers

    def _tools(self, command: str) -> PearlTools:
        tools = PearlTools(self.config.output_dir, self.config.derived_run_id(command))
        if settings.log_json:
            tools.attach_json_log(settings.log_level)
        return tools

    def tools_for(self, command: str) -> PearlTools:
        """Read-only access to the run directory of a command under this config."""
        return PearlTools(self.config.output_dir, self.config.derived_run_id(command), create=False)

    def _new_env(self, stream: str) -> Environment:
        return make_environment(self.config.env, self.config.human, self.streams.fresh(stream), self.config.house)

    @property
    def steps(self) -> int:
        """Decisions per inference run."""
        return self.config.runtime.days * self.config.steps_per_day

    def checkpoint_path(self) -> Path:
        return Path(self.config.output_dir) / self.config.derived_run_id("train") / CHECKPOINT_NAME

    def _phase2(
        self,
        net: EEQNetwork,
        env: Environment,
        budgets: BudgetConfig,
        stream: str,
    ) -> ConfidenceBuffers:
        """Build labelled buffers on ``env`` and fit fresh heads."""
        buffers = self.confidence_agent.build_buffers(
            net,
            env,
            self.config.privacy,
            budgets,
            self.config.runtime.phase2_steps,
            self.streams.fresh(f"{stream}-phase2"),
        )
        self.confidence_agent.train_confidence_heads(net, buffers, self.streams.fresh(f"{stream}-heads"))
        return buffers

    def load_or_train(self, checkpoint: Optional[Path] = None) -> Tuple[EEQNetwork, str]:
        """
        Load the checkpoint for this configuration, training it first when absent.

        Returns:
            (network, checkpoint SHA-256)
        """
        path = Path(checkpoint) if checkpoint else self.checkpoint_path()
        if not path.exists():
            if checkpoint:
                raise ValueError(f"checkpoint {path} does not exist")
            logger.info(f"No checkpoint at {path}; training first")
            path = self.cmd_train()
        net = EEQNetwork.load(path)
        trained_env = net.metadata.get("env")
        if trained_env and trained_env != self.config.env.value:
            raise ValueError(f"checkpoint was trained on '{trained_env}', config uses '{self.config.env.value}'")
        return net, sha256_file(path)

    def _mi_frame(self, net: EEQNetwork, env: Environment, best: int, buffers: ConfidenceBuffers) -> pd.DataFrame:
        """Per-branch Phase-2 series plus the best branch's series under each state binning."""
        cfg = self.config
        frames = []
        phase2 = buffers.mi.to_frame()
        phase2.insert(0, "binning", cfg.privacy.binning.value)
        phase2.insert(0, "source", "phase2")
        frames.append(phase2)

        steps = max(cfg.runtime.eval_steps, cfg.privacy.window_n)
        trace = self.runtime_agent.run_policy(net, env.clone(), cfg.budgets, steps, forced_branch=best)
        binnings = [StateBinning.FULL, StateBinning.COARSE] if cfg.env == EnvKind.THERMAL else [cfg.privacy.binning]
        for binning in binnings:
            window = cfg.privacy.model_copy(update={"binning": binning})
            frame = mi_series(trace, window).to_frame()
            frame["branch"] = best
            frame.insert(0, "binning", binning.value)
            frame.insert(0, "source", "best_branch")
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    # ------------------------------------------------------------------
    # commands

    def cmd_train(self) -> Path:
        """
        Phase 1 then Phase 2; writes the checkpoint and training CSVs.

        Returns:
            Checkpoint path
        """
        cfg = self.config
        tools = self._tools("train")
        try:
            env = self._new_env("env")
            net = self.trainer.train_phase1(env, seed=cfg.seed)
            tools.write_csv("training.csv", self.trainer.history_frame())

            coarse = cfg.privacy.binning == StateBinning.COARSE
            scores = self.trainer.branch_utility_scores(net, env, cfg.runtime.eval_steps, binning_coarse=coarse)
            tools.write_csv("branch_scores.csv", pd.DataFrame([s.model_dump() for s in scores]))
            best = best_utility_branch(scores)
            logger.info(f"Max-utility branch: L{best + 1} (score {scores[best].score:.2f})")

            buffers = self._phase2(net, env.clone(), cfg.budgets, "train")
            frames = buffers.to_frames()
            tools.write_csv("utility_buffer.csv", frames["utility"])
            tools.write_csv("privacy_buffer.csv", frames["privacy"])
            tools.write_csv("mi_series.csv", self._mi_frame(net, env, best, buffers))

            metadata = {
                "env": cfg.env.value,
                "human": cfg.human,
                "seed": cfg.seed,
                "budgets": {"u": cfg.budgets.u, "p": cfg.budgets.p},
                "i_max": buffers.mi.i_max,
                "best_branch": best,
                "eligible": buffers.eligible_branches(),
                "head_accuracy": {str(k): v for k, v in self.confidence_agent.last_report.items()},
            }
            digest = tools.save_checkpoint(net, metadata)
            tools.write_manifest("train", cfg, __version__, digest)
        except (PearlError, ValueError) as e:
            logger.error(f"Training failed; partial artifacts in {tools.run_dir}: {e}")
            raise
        return tools.checkpoint_path

    def sweep_cell(self, checkpoint: Path) -> TradeoffPoint:
        """
        One (u, p) cell of a sweep using this config's budgets.

        Labels and heads are rebuilt for the cell's budgets, then the mitigated
        policy is served and attacked. Every random stream derives from
        (root seed, u, p), so cells are independent of sweep order.
        """
        cfg = self.config
        u, p = cfg.budgets.u, cfg.budgets.p
        cell = RandomStreams(self.streams.child_seed(f"sweep-u{u:g}-p{p:g}"))
        net = EEQNetwork.load(checkpoint)
        env = make_environment(cfg.env, cfg.human, cell.fresh("env"), cfg.house)

        buffers = self.confidence_agent.build_buffers(
            net, env.clone(), cfg.privacy, cfg.budgets, cfg.runtime.phase2_steps, cell.fresh("phase2")
        )
        eligible = buffers.eligible_branches()
        self.confidence_agent.train_confidence_heads(net, buffers, cell.fresh("heads"))

        trace = self.runtime_agent.run_policy(net, env, cfg.budgets, self.steps)
        adversary = AdversaryAgent(k_max=elbow_k_max(cfg), seed=cell.child_seed("adversary"))
        report = adversary.attack(trace.to_frame(), cfg.steps_per_day, trace.ground_truth_frame(), cfg.runtime.features)
        summary = env.utility_summary([e.utility for e in trace.entries])
        logger.info(f"Cell u={u}, p={p}: eligible {format_layers(eligible)}, accuracy {report.accuracy:.3f}")
        return TradeoffPoint(
            human=cfg.human,
            u=u,
            p=p,
            seed=cfg.seed,
            eligible=eligible,
            accuracy=report.accuracy,
            utility_mean=summary["mean"],
            utility_std=summary["std"],
            in_range_pct=summary.get("in_range_pct"),
            infeasible_fraction=float(np.mean([not e.feasible for e in trace.entries])),
            mean_branch=float(np.mean([e.branch for e in trace.entries])),
        )

    def cmd_sweep(
        self,
        u_list: Sequence[float] = DEFAULT_U_LIST,
        p_list: Sequence[float] = DEFAULT_P_LIST,
        checkpoint: Optional[Path] = None,
    ) -> Tuple[pd.DataFrame, List[TradeoffPoint]]:
        """
        Budget sweep: eligibility table and tradeoff points.

        Args:
            u_list: Utility budgets (table columns)
            p_list: Privacy budgets (table rows)
            checkpoint: Trained checkpoint (default: this config's train run)

        Returns:
            (eligibility table, tradeoff points)
        """
        cfg = self.config
        _, digest = self.load_or_train(checkpoint)
        path = Path(checkpoint) if checkpoint else self.checkpoint_path()
        tools = self._tools("sweep")
        jobs = [(cfg.model_dump(mode="json"), str(path), u, p) for p in p_list for u in u_list]
        logger.info(f"Sweeping {len(jobs)} budget cells with {settings.sweep_workers} worker(s)")

        try:
            if settings.sweep_workers > 1:
                with ProcessPoolExecutor(max_workers=settings.sweep_workers) as pool:
                    results = list(pool.map(run_sweep_cell, jobs))
            else:
                results = [run_sweep_cell(job) for job in jobs]
        except (PearlError, ValueError) as e:
            logger.error(f"Sweep failed; run dir {tools.run_dir}: {e}")
            raise

        points = [TradeoffPoint.model_validate(r) for r in results]
        table = eligibility_table({(pt.u, pt.p): pt.eligible for pt in points})
        tools.write_csv("eligibility.csv", table, index=True)
        frame = pd.DataFrame([pt.model_dump() for pt in points])
        frame["eligible"] = [format_layers(pt.eligible) for pt in points]
        tools.write_csv("tradeoff.csv", frame)
        tools.write_json("tradeoff.json", [pt.model_dump() for pt in points])
        tools.write_manifest("sweep", cfg, __version__, digest)
        return table, points

    def cmd_infer(
        self,
        branch: Optional[Union[int, str]] = None,
        checkpoint: Optional[Path] = None,
    ) -> ActionTrace:
        """
        Serve the policy for the configured number of days and attack the result.

        Args:
            branch: Zero-based forced branch, ``"best"`` for the max-utility
                branch (unmitigated baseline), None for budgeted selection
            checkpoint: Trained checkpoint

        Returns:
            The served trace
        """
        cfg = self.config
        net, digest = self.load_or_train(checkpoint)
        if branch == "best":
            branch = int(net.metadata["best_branch"])
        if branch is not None and not 0 <= int(branch) < net.n_branches:
            raise ValueError(f"branch must be in [1, {net.n_branches}], got {int(branch) + 1}")
        command = "infer-baseline" if branch is not None else "infer"
        tools = self._tools(command)
        env = self._new_env("inference")

        if branch is None:
            trained = net.metadata.get("budgets", {})
            if not net.has_heads or (trained.get("u"), trained.get("p")) != (cfg.budgets.u, cfg.budgets.p):
                logger.info(f"Rebuilding confidence heads for u={cfg.budgets.u}, p={cfg.budgets.p}")
                self._phase2(net, env.clone(), cfg.budgets, "infer")

        trace = self.runtime_agent.run_policy(
            net, env, cfg.budgets, self.steps, forced_branch=None if branch is None else int(branch)
        )
        tools.write_csv("trace.csv", trace.to_frame())
        tools.write_csv("ground_truth.csv", trace.ground_truth_frame())

        report = self.adversary.attack(trace.to_frame(), cfg.steps_per_day, trace.ground_truth_frame(), cfg.runtime.features)
        tools.write_csv("clustering.csv", report.to_frame())
        tools.write_json("clustering.json", report.summary())

        s, a = trace.pairs(coarse=cfg.privacy.binning == StateBinning.COARSE)
        summary = {
            "mode": "baseline" if branch is not None else "mitigated",
            "branch": None if branch is None else int(branch),
            "utility": env.utility_summary([e.utility for e in trace.entries]),
            "infeasible_fraction": float(np.mean([not e.feasible for e in trace.entries])),
            "mean_branch": float(np.mean([e.branch for e in trace.entries])),
            "mi_bits": mutual_information_arrays(s, a, cfg.privacy.bias_correction),
            "accuracy": report.accuracy,
        }
        tools.write_json("inference.json", summary)
        tools.write_manifest(command, cfg, __version__, digest)
        return trace

    def cmd_attack(
        self,
        trace_csv: Path,
        ground_truth_csv: Optional[Path] = None,
        features: Optional[ClusterFeatures] = None,
        k: Optional[int] = None,
    ) -> ClusteringReport:
        """
        Run the clustering adversary on stored CSV files.

        Args:
            trace_csv: Trace with ``t`` and ``a_id`` columns
            ground_truth_csv: Optional ``t``/``truth`` file for scoring
            features: Feature construction (default from the config)
            k: Fixed cluster count

        Returns:
            Clustering report

        Raises:
            SchemaError: A file is unreadable or lacks required columns
        """
        cfg = self.config
        trace = read_table(Path(trace_csv), ["t", "a_id"], "trace")
        truth = read_table(Path(ground_truth_csv), ["t", "truth"], "ground truth") if ground_truth_csv else None
        tools = self._tools("attack")
        report = self.adversary.attack(trace, cfg.steps_per_day, truth, features or cfg.runtime.features, k)
        tools.write_csv("clustering.csv", report.to_frame())
        tools.write_json("clustering.json", report.summary())
        tools.write_manifest("attack", cfg, __version__)
        return report

    def cmd_drift(self, control: bool = False, checkpoint: Optional[Path] = None) -> DriftReport:
        """
        Behaviour-switch scenario under the variability monitor.

        The network trained on the first profile serves for
        ``drift_days_before`` days, the occupant then switches to the second
        profile for ``drift_days_after`` days. The control run never switches.

        Args:
            control: Skip the switch
            checkpoint: Checkpoint trained on the first profile

        Returns:
            Drift report with trigger days and the MI curve
        """
        cfg = self.config
        if cfg.env not in DRIFT_PROFILES:
            raise ValueError(f"drift scenario is not defined for env '{cfg.env.value}'")
        rt = cfg.runtime
        src = rt.drift_from or DRIFT_PROFILES[cfg.env][0]
        dst = rt.drift_to or DRIFT_PROFILES[cfg.env][1]
        agent = self if cfg.human == src else PearlMainAgent(cfg.with_overrides({"human": src}))
        net, digest = agent.load_or_train(checkpoint)
        tools = agent._tools("drift-control" if control else "drift")

        spd = cfg.steps_per_day
        switch_step = rt.drift_days_before * spd
        total = (rt.drift_days_before + rt.drift_days_after) * spd
        env = agent._new_env("drift")
        events = {} if control else {switch_step: lambda: env.switch_profile(profile_for(cfg.env, dst))}

        scale = cfg.training.reward_scale if cfg.training.reward_scale is not None else env.reward_scale
        monitor = VariabilityMonitor(
            cfg.budgets.v, None, env.observation_dim, agent.streams.fresh("retrain-replay"), reward_scale=scale
        )

        def retrain(current: EEQNetwork, replay: ReplayBuffer) -> EEQNetwork:
            n = len(monitor.retrained_at)
            updated = agent.trainer.fine_tune(current.copy(), replay, rt.retrain_updates, seed=agent.streams.child_seed(f"retrain-{n}"))
            agent._phase2(updated, env.clone(), cfg.budgets, f"retrain-{n}")
            return updated

        _, trace, triggers = agent.runtime_agent.monitor_and_retrain(
            net, env, monitor, cfg.budgets, cfg.privacy, total, retrain, events=events
        )

        windows = [e for e in trace.entries if e.i_current is not None]
        recovery = None
        if triggers and monitor.retrained_at:
            after = [e for e in windows if e.t > monitor.retrained_at[-1]]
            if after:
                new_max = max(e.i_current for e in after)
                first = next(e for e in after if e.i_current >= cfg.budgets.v * new_max)
                recovery = (first.t - triggers[0]) / spd

        report = DriftReport(
            switch_day=None if control else float(rt.drift_days_before),
            trigger_days=[(t + 1) / spd for t in triggers],
            recovery_days=recovery,
            coalesced=monitor.coalesced,
            mi_curve=[
                {"day": (e.t + 1) / spd, "i_bits": e.i_current, "trigger": float(e.trigger)} for e in windows
            ],
        )
        tools.write_csv("trace.csv", trace.to_frame())
        tools.write_json("drift.json", report)
        tools.write_manifest("drift", agent.config, __version__, digest)
        logger.info(f"Drift scenario ({src}->{dst if not control else src}): {len(triggers)} trigger(s)")
        return report

    def cmd_report(self) -> RunReport:
        """
        Assemble ``report.json`` from the artifacts of this configuration's runs.
        """
        cfg = self.config
        run = self.tools_for
        train, baseline, mitigated, sweep = run("train"), run("infer-baseline"), run("infer"), run("sweep")
        report = RunReport(run_id=cfg.derived_run_id("report"))

        scores = train.read_csv("branch_scores.csv")
        if scores is not None and not scores.empty:
            best = best_utility_branch(scores["score"].tolist())
            report.best_branch = best
            report.utility = {k: float(scores.loc[best, k]) for k in ("score", "utility_mean", "utility_std")}
        mi = train.read_csv("mi_series.csv")
        if mi is not None and not mi.empty:
            report.i_max = float(mi.loc[mi["source"] == "phase2", "I_max_so_far"].max())

        for tools, field in ((baseline, "accuracy_baseline"), (mitigated, "accuracy_mitigated")):
            clustering = tools.read_json("clustering.json")
            if clustering:
                setattr(report, field, clustering.get("accuracy"))

        table = sweep.read_csv("eligibility.csv")
        if table is not None:
            table = table.set_index("p").fillna("")
            report.eligibility = {
                f"{p:g}": {str(u): str(v) for u, v in row.items()} for p, row in table.iterrows()
            }
        tradeoff = sweep.read_json("tradeoff.json")
        if tradeoff:
            report.tradeoff = [TradeoffPoint.model_validate(pt) for pt in tradeoff]

        src = cfg.runtime.drift_from or DRIFT_PROFILES.get(cfg.env, (cfg.human,))[0]
        drift_cfg = cfg if cfg.human == src else cfg.with_overrides({"human": src})
        drift = PearlTools(cfg.output_dir, drift_cfg.derived_run_id("drift"), create=False).read_json("drift.json")
        if drift:
            report.drift = DriftReport.model_validate(drift)

        tools = self._tools("report")
        tools.write_json("report.json", report)
        tools.write_manifest("report", cfg, __version__)
        return report


def run_sweep_cell(job: Tuple[Dict[str, Any], str, float, float]) -> Dict[str, Any]:
    """Worker entry point for one sweep cell (picklable for process pools)."""
    config_data, checkpoint, u, p = job
    config = ExperimentConfig.model_validate(config_data).with_overrides({"u": u, "p": p})
    return PearlMainAgent(config).sweep_cell(Path(checkpoint)).model_dump()


def _float_list(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per pipeline."""
    parser = argparse.ArgumentParser(prog="pearl", description="Privacy-aware early-exit DQN experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment file")
    common.add_argument("--env", choices=[k.value for k in EnvKind], help="Environment")
    common.add_argument("--human", help="Profile id (H1-H3, P1-P3)")
    common.add_argument("--seed", type=int, help="Root seed")
    common.add_argument("--u", type=float, help="Utility budget")
    common.add_argument("--p", type=float, help="Privacy budget")
    common.add_argument("--v", type=float, help="Variability threshold")
    common.add_argument("--n-layers", type=int, help="Trunk layers")
    common.add_argument("--output-dir", help="Root of run directories")
    common.add_argument("--checkpoint", type=Path, help="Trained checkpoint (default: this config's train run)")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="Phase 1 and Phase 2 training")

    sweep = sub.add_parser("sweep", parents=[common], help="Budget sweep")
    sweep.add_argument("--u-list", type=_float_list, default=DEFAULT_U_LIST, help="Comma-separated u values")
    sweep.add_argument("--p-list", type=_float_list, default=DEFAULT_P_LIST, help="Comma-separated p values")

    infer = sub.add_parser("infer", parents=[common], help="Serve the policy and attack the trace")
    infer.add_argument("--branch", help="Force a 1-based exit layer, or 'best' for the max-utility branch")

    attack = sub.add_parser("attack", parents=[common], help="Cluster a stored trace")
    attack.add_argument("--trace", type=Path, required=True, help="Trace CSV")
    attack.add_argument("--ground-truth", type=Path, help="Ground-truth CSV")
    attack.add_argument("--features", choices=[f.value for f in ClusterFeatures], help="Clustering features")
    attack.add_argument("--k", type=int, help="Fixed cluster count")

    drift = sub.add_parser("drift", parents=[common], help="Behaviour-switch scenario")
    drift.add_argument("--control", action="store_true", help="Run without the switch")

    sub.add_parser("report", parents=[common], help="Assemble report.json")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Experiment file (if any) with CLI overrides applied."""
    overrides = {
        "env": args.env,
        "human": args.human,
        "seed": args.seed,
        "u": args.u,
        "p": args.p,
        "v": args.v,
        "n_layers": args.n_layers,
        "output_dir": args.output_dir,
    }
    if args.config:
        return ExperimentConfig.from_yaml(args.config, overrides)
    return ExperimentConfig().with_overrides(overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the ``pearl`` command."""
    args = build_parser().parse_args(argv)
    configure_logging(settings.log_level)

    try:
        agent = PearlMainAgent(load_config(args))

        if args.command == "train":
            print(f"Checkpoint: {agent.cmd_train()}")
        elif args.command == "sweep":
            table, points = agent.cmd_sweep(args.u_list, args.p_list, args.checkpoint)
            print("\n=== Eligible exits (rows p, columns u) ===\n")
            print(table.to_string())
            for pt in points:
                print(f"u={pt.u:g} p={pt.p:g}: accuracy={pt.accuracy:.3f} utility_std={pt.utility_std:.3f}")
        elif args.command == "infer":
            branch: Optional[Union[int, str]] = None
            if args.branch == "best":
                branch = "best"
            elif args.branch is not None:
                branch = int(args.branch) - 1
            trace = agent.cmd_infer(branch, args.checkpoint)
            print(f"Served {len(trace)} decisions")
        elif args.command == "attack":
            features = ClusterFeatures(args.features) if args.features else None
            report = agent.cmd_attack(args.trace, args.ground_truth, features, args.k)
            accuracy = "n/a" if report.accuracy is None else f"{report.accuracy:.3f}"
            print(f"k={report.k_selected} accuracy={accuracy}")
        elif args.command == "drift":
            report = agent.cmd_drift(control=args.control, checkpoint=args.checkpoint)
            print(f"Triggers at days {report.trigger_days}; recovery {report.recovery_days}")
        elif args.command == "report":
            print(agent.cmd_report().model_dump_json(indent=2))
    except (PearlError, ValueError) as e:
        logger.error(f"pearl {args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
