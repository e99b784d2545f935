"""
Confidence Agent - Utility and privacy confidence paths
Builds the labelled replay buffers and trains the per-branch sigmoid heads
that tell inference which exits respect the utility and privacy budgets.
"""

from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field

from ..config import settings
from ..environments.base import Environment
from ..models.ee_qnet import EEQNetwork
from ..models.nn_core import LossKind, Optimizer
from ..schemas.budgets import BudgetConfig, MIWindowConfig, StateBinning
from ..schemas.records import MIPoint, MISeries, PrivacyLabelRecord, UtilityLabelRecord
from ..utils.helpers import format_layers
from ..utils.privacy_metric import mutual_information_arrays
from ..utils.validators import validate_unit_interval


def utility_labels(q_per_branch: Sequence[float], u: float) -> np.ndarray:
    """
    UCL_i = 1 iff Q_i_max >= u * Q_max.

    When Q_max <= 0 the threshold becomes ``Q_max - (1 - u) * |Q_max|``.

    Args:
        q_per_branch: Max Q-value of each branch at one state
        u: Utility budget in (0, 1]

    Returns:
        Binary labels, one per branch
    """
    validate_unit_interval(u, "u")
    q = np.asarray(q_per_branch, dtype=np.float64)
    if q.size == 0:
        raise ValueError("need at least one branch")
    q_max = q.max()
    threshold = u * q_max if q_max > 0 else q_max - (1.0 - u) * abs(q_max)
    return (q >= threshold).astype(np.int64)


def privacy_labels(mi_per_branch: Sequence[float], p: float, mi_max: float) -> np.ndarray:
    """
    PCL_i = 1 iff I_i < p * I_max; all ones when no leakage has been observed.

    Args:
        mi_per_branch: Windowed MI of each branch (bits)
        p: Privacy budget in (0, 1]
        mi_max: Running maximum MI

    Returns:
        Binary labels, one per branch
    """
    validate_unit_interval(p, "p")
    mi = np.asarray(mi_per_branch, dtype=np.float64)
    if np.any(mi < 0):
        raise ValueError("mutual information values must be non-negative")
    if mi_max == 0:
        return np.ones(mi.size, dtype=np.int64)
    return (mi < p * mi_max).astype(np.int64)


class ConfidenceBuffers(BaseModel):
    """Utility and privacy replay buffers with per-branch labels."""

    utility: List[UtilityLabelRecord] = Field(default_factory=list)
    privacy: List[PrivacyLabelRecord] = Field(default_factory=list)
    mi: MISeries = Field(default_factory=MISeries)
    action_sampling: str = "uniform over branches"

    def utility_arrays(self):
        """(states, actions, labels [N x B])."""
        return (
            np.array([r.s for r in self.utility]),
            np.array([r.a for r in self.utility], dtype=np.int64),
            np.array([r.ucl for r in self.utility], dtype=np.int64),
        )

    def privacy_arrays(self):
        return (
            np.array([r.s for r in self.privacy]),
            np.array([r.a for r in self.privacy], dtype=np.int64),
            np.array([r.pcl for r in self.privacy], dtype=np.int64),
        )

    def eligible_branches(self) -> List[int]:
        """Branches whose true labels are 1 for a majority of records in both buffers."""
        if not self.utility or not self.privacy:
            return []
        ucl = np.array([r.ucl for r in self.utility]).mean(axis=0)
        pcl = np.array([r.pcl for r in self.privacy]).mean(axis=0)
        return [int(i) for i in np.flatnonzero((ucl > 0.5) & (pcl > 0.5))]

    def to_frames(self) -> Dict[str, pd.DataFrame]:
        """CSV forms: state fields, action, one label column per branch."""
        def frame(records, key):
            rows = []
            for r in records:
                row = {f"s{j}": v for j, v in enumerate(r.s)}
                row["a"] = r.a
                row.update({f"{key}{i + 1}": v for i, v in enumerate(getattr(r, key))})
                if key == "pcl":
                    row["window"] = r.window
                rows.append(row)
            return pd.DataFrame(rows)

        return {"utility": frame(self.utility, "ucl"), "privacy": frame(self.privacy, "pcl")}


def eligibility_table(cells: Dict[tuple, List[int]]) -> pd.DataFrame:
    """
    Budget table: rows p, columns u, cell = eligible layers (``L1,6``) or ``×``.

    Args:
        cells: Eligible zero-based branches keyed by (u, p)

    Returns:
        Data frame indexed by p
    """
    us = sorted({u for u, _ in cells})
    ps = sorted({p for _, p in cells})
    table = pd.DataFrame(index=pd.Index(ps, name="p"), columns=us, dtype=object)
    for (u, p), branches in cells.items():
        table.loc[p, u] = format_layers(branches)
    return table.fillna("")


class ConfidenceAgent:
    """
    Phase-2 worker.

    Records every visited state with utility labels and broadcasts windowed
    privacy labels to all pairs of the window.
    """

    def __init__(
        self,
        epochs: Optional[int] = None,
        learning_rate: Optional[float] = None,
        batch_size: Optional[int] = None,
        holdout: Optional[float] = None,
    ):
        """Initialize head-training settings (defaults from settings)."""
        self.epochs = epochs or settings.head_epochs
        self.learning_rate = learning_rate or settings.head_learning_rate
        self.batch_size = batch_size or settings.head_batch_size
        self.holdout = holdout if holdout is not None else settings.head_holdout
        self.threshold = settings.decision_threshold
        self.last_report: Dict[int, Dict[str, float]] = {}

    def build_buffers(
        self,
        net: EEQNetwork,
        env: Environment,
        mi_cfg: MIWindowConfig,
        budgets: BudgetConfig,
        steps: int,
        rng: np.random.Generator,
        initial_i_max: Optional[float] = None,
    ) -> ConfidenceBuffers:
        """
        Interact with the environment and label what is seen.

        The executed action is the greedy action of a uniformly drawn branch.
        Per-branch MI is measured on each branch's own greedy action at the
        visited states.

        Args:
            net: Phase-1-trained network
            env: Environment (advanced in place)
            mi_cfg: MI window and binning
            budgets: u and p used for the labels
            steps: Interactions, at least one window
            rng: Branch sampling stream
            initial_i_max: Running I_max carried over from earlier history

        Returns:
            Filled buffers
        """
        if steps < mi_cfg.window_n:
            raise ValueError(f"steps ({steps}) must cover at least one MI window ({mi_cfg.window_n})")
        coarse = mi_cfg.binning == StateBinning.COARSE
        n_b = net.n_branches
        buffers = ConfidenceBuffers()
        i_max = initial_i_max or 0.0

        win_states: List[np.ndarray] = []
        win_actions: List[int] = []
        win_sids: List[int] = []
        win_greedy: List[np.ndarray] = []
        window_index, window_start = 0, 0

        obs = env.reset()
        for t in range(steps):
            q = net.q_all(obs)
            greedy = q.argmax(axis=1)
            branch = int(rng.integers(n_b))
            action = int(greedy[branch])
            buffers.utility.append(
                UtilityLabelRecord(
                    s=obs.tolist(),
                    a=action,
                    ucl=utility_labels(q.max(axis=1), budgets.u).tolist(),
                    q_max=q.max(axis=1).tolist(),
                )
            )

            next_obs, _, done, info = env.step(action)
            win_states.append(obs)
            win_actions.append(action)
            win_sids.append(info["s_coarse"] if coarse else info["s_id"])
            win_greedy.append(greedy)

            if len(win_actions) == mi_cfg.window_n:
                s_ids = np.array(win_sids)
                greedy_mat = np.array(win_greedy)
                mi = [mutual_information_arrays(s_ids, greedy_mat[:, i], mi_cfg.bias_correction) for i in range(n_b)]
                i_max = max(i_max, max(mi))
                pcl = privacy_labels(mi, budgets.p, i_max).tolist()
                for s, a in zip(win_states, win_actions):
                    buffers.privacy.append(PrivacyLabelRecord(s=s.tolist(), a=a, pcl=pcl, window=window_index))
                for i, value in enumerate(mi):
                    buffers.mi.points.append(
                        MIPoint(branch=i, window_start=window_start, i_bits=value, i_max_so_far=i_max)
                    )
                window_index += 1
                window_start = t + 1
                win_states, win_actions, win_sids, win_greedy = [], [], [], []

            obs = env.reset() if done or info.get("truncated") else next_obs

        buffers.mi.i_max = i_max
        logger.info(
            f"Phase 2 buffers: {len(buffers.utility)} utility / {len(buffers.privacy)} privacy records, "
            f"I_max={i_max:.3f} bits, eligible {format_layers(buffers.eligible_branches())}"
        )
        return buffers

    def _train_head(
        self,
        stack,
        x: np.ndarray,
        y: np.ndarray,
        rng: np.random.Generator,
        optimizer: Optimizer,
        epochs: int,
    ) -> float:
        n = len(y)
        order = rng.permutation(n)
        n_test = int(round(self.holdout * n)) if n > 1 else 0
        test, train = order[:n_test], order[n_test:]
        if len(train) == 0:
            train = order
        target = y.reshape(-1, 1).astype(np.float64)
        for _ in range(epochs):
            perm = rng.permutation(train)
            for lo in range(0, len(perm), self.batch_size):
                idx = perm[lo: lo + self.batch_size]
                stack.backward_and_step(x[idx], target[idx], LossKind.BCE, optimizer, weights=np.ones((len(idx), 1)))
        eval_idx = test if len(test) else train
        pred = (stack.forward(x[eval_idx])[:, 0] >= self.threshold).astype(np.int64)
        return float(np.mean(pred == y[eval_idx]))

    def train_confidence_heads(
        self,
        net: EEQNetwork,
        buffers: ConfidenceBuffers,
        rng: np.random.Generator,
        epochs: Optional[int] = None,
    ) -> EEQNetwork:
        """
        Fit fresh utility and privacy heads for every branch with binary cross-entropy.

        Q-network parameters are only read. Held-out accuracy per head is kept
        in ``last_report``.

        Args:
            net: Network with Phase-1 branches (heads replaced in place)
            buffers: Labelled buffers
            rng: Initialization, split and shuffling stream
            epochs: Override of the configured epoch count

        Returns:
            The network with trained heads
        """
        if not buffers.utility or not buffers.privacy:
            raise ValueError("confidence buffers are empty")
        epochs = epochs or self.epochs
        net.attach_confidence_heads(rng)
        optimizer = Optimizer("adam", self.learning_rate, settings.adam_beta1, settings.adam_beta2)

        u_states, u_actions, u_labels = buffers.utility_arrays()
        p_states, p_actions, p_labels = buffers.privacy_arrays()
        u_feats = net.trunk_features(u_states)
        p_feats = net.trunk_features(p_states)

        self.last_report = {}
        for i in range(net.n_branches):
            u_x = net.head_inputs(u_states, u_feats[i], u_actions)
            p_x = net.head_inputs(p_states, p_feats[i], p_actions)
            u_acc = self._train_head(net.utility_stack(i), u_x, u_labels[:, i], rng, optimizer, epochs)
            p_acc = self._train_head(net.privacy_stack(i), p_x, p_labels[:, i], rng, optimizer, epochs)
            self.last_report[i] = {"utility_accuracy": u_acc, "privacy_accuracy": p_acc}
            logger.debug(f"Branch {i + 1}: utility head acc {u_acc:.3f}, privacy head acc {p_acc:.3f}")

        mean_acc = np.mean([v for r in self.last_report.values() for v in r.values()])
        logger.info(f"Trained confidence heads for {net.n_branches} branches; mean held-out accuracy {mean_acc:.3f}")
        return net
