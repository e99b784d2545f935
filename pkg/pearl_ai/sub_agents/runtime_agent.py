"""
Runtime Agent - Budgeted inference and drift monitoring
Selects an eligible exit per decision and retrains the network when the
leakage of the served actions falls well below its historical maximum.
"""

from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..config import settings
from ..environments.base import Environment
from ..models.ee_qnet import EEQNetwork, ReplayBuffer
from ..schemas.budgets import BudgetConfig, MIWindowConfig, StateBinning
from ..schemas.records import ActionTrace, ExitDecision, TraceEntry
from ..utils.privacy_metric import mutual_information_arrays
from ..utils.validators import InfeasibleExitError


class RetrainState(str, Enum):
    """Monitor state."""
    STABLE = "stable"
    RETRAINING = "retraining"


class VariabilityMonitor:
    """
    Tracks windowed MI of one monitored exit against ``v * I_max``.

    The monitored exit is the branch selected most often in the calibration
    window; MI is measured on its greedy actions at the visited states so a
    change of served exit alone does not move ``i_current``.

    A trigger opens a retraining period during which new-behaviour
    transitions are collected into R; triggers inside that period are
    coalesced. After the retrain ``i_max`` is cleared and the next window
    recalibrates it.
    """

    def __init__(
        self,
        v: float,
        i_max: Optional[float],
        state_dim: int,
        rng: np.random.Generator,
        replay_capacity: Optional[int] = None,
        reward_scale: float = 1.0,
    ):
        """
        Initialize the monitor.

        Args:
            v: Variability threshold fraction
            i_max: Maximum MI at deployment (None calibrates from the first window)
            state_dim: Observation dimension for the replay buffer R
            rng: Replay sampling stream
            replay_capacity: Capacity of R (default from settings)
            reward_scale: Multiplier applied to rewards stored in R
        """
        self.v = v
        self.i_max = i_max
        self.i_current: Optional[float] = None
        self.branch: Optional[int] = None
        self.replay = ReplayBuffer(replay_capacity or settings.replay_capacity, state_dim, rng)
        self.state = RetrainState.STABLE
        self.reward_scale = reward_scale
        self.coalesced = 0
        self.retrained_at: List[int] = []

    @property
    def threshold(self) -> Optional[float]:
        return None if self.i_max is None else self.v * self.i_max

    def monitored_branch(self, exits: List[int]) -> int:
        """Fix the monitored exit on first use: the most frequently served branch."""
        if self.branch is None:
            self.branch = int(np.bincount(exits).argmax())
            logger.info(f"Monitoring exit branch {self.branch + 1}")
        return self.branch

    def should_trigger(self, i_current: float) -> bool:
        """Trigger predicate: ``i_current < v * i_max``."""
        return self.i_max is not None and i_current < self.v * self.i_max

    def observe(self, i_current: float) -> bool:
        """
        Record one window's MI.

        Returns:
            True when a retrain should start now
        """
        self.i_current = i_current
        if self.state == RetrainState.RETRAINING:
            if self.should_trigger(i_current):
                self.coalesced += 1
            return False
        if self.i_max is None:
            self.i_max = i_current
            logger.info(f"Monitor calibrated: I_max={i_current:.3f} bits")
            return False
        if self.should_trigger(i_current):
            return True
        self.i_max = max(self.i_max, i_current)
        return False

    def begin_retrain(self) -> None:
        self.state = RetrainState.RETRAINING

    def finish_retrain(self) -> None:
        self.state = RetrainState.STABLE
        self.i_max = None
        self.branch = None


def fallback_exit(utility_scores: np.ndarray, privacy_scores: np.ndarray, threshold: float = 0.5) -> int:
    """
    Branch used when no exit satisfies both budgets.

    The most private branch among utility-eligible ones, else the most
    private branch overall.
    """
    ok = np.flatnonzero(utility_scores >= threshold)
    if ok.size:
        return int(ok[np.argmax(privacy_scores[ok])])
    return int(np.argmax(privacy_scores))


class RuntimeAgent:
    """Inference under (u, p) budgets."""

    def __init__(self, threshold: Optional[float] = None):
        """Initialize with the head decision threshold."""
        self.threshold = threshold if threshold is not None else settings.decision_threshold

    def select_exit(self, net: EEQNetwork, obs: np.ndarray, budgets: BudgetConfig) -> ExitDecision:
        """
        Lowest-index branch whose utility and privacy heads both reach the threshold.

        Args:
            net: Network with trained heads
            obs: Current observation
            budgets: Budgets the heads were trained for

        Returns:
            ExitDecision for the selected branch

        Raises:
            InfeasibleExitError: No branch satisfies both budgets
        """
        greedy, u_prob, p_prob = net.confidence(obs)
        for i in range(net.n_branches):
            if u_prob[i] >= self.threshold and p_prob[i] >= self.threshold:
                return ExitDecision(
                    branch=i,
                    action=int(greedy[i]),
                    ucl_ok=True,
                    pcl_ok=True,
                    utility_score=float(u_prob[i]),
                    privacy_score=float(p_prob[i]),
                    greedy_actions=greedy.tolist(),
                )
        raise InfeasibleExitError(
            f"no branch satisfies u={budgets.u}, p={budgets.p}",
            utility_scores=u_prob,
            privacy_scores=p_prob,
            greedy_actions=greedy,
        )

    def decide(self, net: EEQNetwork, obs: np.ndarray, budgets: BudgetConfig) -> ExitDecision:
        """select_exit with the infeasibility fallback applied."""
        try:
            return self.select_exit(net, obs, budgets)
        except InfeasibleExitError as e:
            branch = fallback_exit(e.utility_scores, e.privacy_scores, self.threshold)
            return ExitDecision(
                branch=branch,
                action=int(e.greedy_actions[branch]),
                ucl_ok=bool(e.utility_scores[branch] >= self.threshold),
                pcl_ok=bool(e.privacy_scores[branch] >= self.threshold),
                feasible=False,
                utility_score=float(e.utility_scores[branch]),
                privacy_score=float(e.privacy_scores[branch]),
                greedy_actions=np.asarray(e.greedy_actions).tolist(),
            )

    def run_policy(
        self,
        net: EEQNetwork,
        env: Environment,
        budgets: BudgetConfig,
        steps: int,
        forced_branch: Optional[int] = None,
        start_t: int = 0,
    ) -> ActionTrace:
        """
        Serve ``steps`` decisions.

        Args:
            net: Network (heads required unless a branch is forced)
            env: Environment, reset before the first decision
            budgets: Budgets
            steps: Number of decisions
            forced_branch: Always exit at this branch (unmitigated baseline)
            start_t: Step index of the first entry

        Returns:
            Trace with infeasible steps marked ``feasible=False``
        """
        if steps < 1:
            raise ValueError("steps must be at least 1")
        trace = ActionTrace()
        obs = env.reset()
        infeasible = 0
        for k in range(steps):
            obs, entry, _ = self._serve_step(net, env, obs, budgets, forced_branch, start_t + k)
            trace.append(entry)
            infeasible += int(not entry.feasible)
        if infeasible:
            logger.warning(f"{infeasible}/{steps} steps had no feasible exit; fallback applied")
        return trace

    def _serve_step(
        self,
        net: EEQNetwork,
        env: Environment,
        obs: np.ndarray,
        budgets: BudgetConfig,
        forced_branch: Optional[int],
        t: int,
        monitor: Optional[VariabilityMonitor] = None,
    ) -> Tuple[np.ndarray, TraceEntry, List[int]]:
        greedy: List[int] = []
        if forced_branch is not None:
            branch = forced_branch
            action = int(np.argmax(net.q_values(obs, branch)))
            feasible = True
        else:
            decision = self.decide(net, obs, budgets)
            branch, action, feasible = decision.branch, decision.action, decision.feasible
            greedy = decision.greedy_actions
        next_obs, reward, done, info = env.step(action)
        if monitor is not None:
            monitor.replay.push(obs, action, reward * monitor.reward_scale, next_obs, done)
        entry = TraceEntry(
            t=t,
            s_id=int(info["s_id"]),
            s_coarse=int(info["s_coarse"]),
            a_id=action,
            a_value=float(info["a_value"]),
            branch=branch,
            feasible=feasible,
            reward=float(reward),
            utility=float(info["utility"]),
            truth=int(info["truth"]),
            phase=int(info["phase"]),
            day=int(info["day"]),
        )
        obs = env.reset() if done else next_obs
        return obs, entry, greedy

    def monitor_and_retrain(
        self,
        net: EEQNetwork,
        env: Environment,
        monitor: VariabilityMonitor,
        budgets: BudgetConfig,
        mi_cfg: MIWindowConfig,
        steps: int,
        retrain: Callable[[EEQNetwork, ReplayBuffer], EEQNetwork],
        collect_steps: Optional[int] = None,
        events: Optional[Dict[int, Callable[[], None]]] = None,
    ) -> Tuple[EEQNetwork, ActionTrace, List[int]]:
        """
        Serve while watching leakage; retrain on drift.

        After every complete window the MI between the visited states and the
        monitored exit's greedy actions becomes ``i_current``. When it drops
        below ``v * i_max`` the monitor keeps serving for ``collect_steps``
        more decisions to gather new-behaviour transitions, then ``retrain``
        produces a new network from the current one and the monitor's
        replay R.

        Args:
            net: Serving network with heads
            env: Environment, reset before the first decision
            monitor: Variability monitor (its replay R is filled while serving)
            budgets: Budgets
            mi_cfg: Window length and binning
            steps: Total decisions
            retrain: Callable (net, replay) -> retrained network
            collect_steps: Decisions between trigger and retrain (default one window)
            events: Optional callbacks keyed by step index (e.g. a behaviour switch)

        Returns:
            (final network, annotated trace, trigger steps)
        """
        coarse = mi_cfg.binning == StateBinning.COARSE
        collect = mi_cfg.window_n if collect_steps is None else collect_steps
        trace = ActionTrace()
        triggers: List[int] = []
        retrain_at: Optional[int] = None
        obs = env.reset()
        window_s: List[int] = []
        window_g: List[List[int]] = []
        window_b: List[int] = []

        for t in range(steps):
            if events and t in events:
                events[t]()
            obs, entry, greedy = self._serve_step(net, env, obs, budgets, None, t, monitor=monitor)
            window_s.append(entry.s_coarse if coarse else entry.s_id)
            window_g.append(greedy)
            window_b.append(entry.branch)

            if len(window_s) == mi_cfg.window_n:
                branch = monitor.monitored_branch(window_b)
                actions = np.array([g[branch] for g in window_g])
                i_current = mutual_information_arrays(np.array(window_s), actions, mi_cfg.bias_correction)
                entry.i_current = i_current
                if monitor.observe(i_current):
                    entry.trigger = True
                    triggers.append(t)
                    logger.info(f"Drift at step {t}: I={i_current:.3f} < {monitor.v} x {monitor.i_max:.3f}")
                    monitor.begin_retrain()
                    retrain_at = t + collect
                window_s, window_g, window_b = [], [], []

            if retrain_at is not None and t >= retrain_at:
                logger.info(f"Retraining at step {t} from {len(monitor.replay)} transitions")
                net = retrain(net, monitor.replay)
                monitor.finish_retrain()
                monitor.retrained_at.append(t)
                retrain_at = None
                # the next window starts clean for recalibration
                window_s, window_g, window_b = [], [], []
            trace.append(entry)

        if monitor.coalesced:
            logger.info(f"{monitor.coalesced} trigger(s) coalesced into running retrains")
        return net, trace, triggers
