"""
Early-exit Q-network.

A trunk of dense layers where every trunk layer feeds an exit branch that
emits a full Q-value vector. After confidence-path training each branch also
carries a utility head and a privacy head (sigmoid outputs).
"""

import copy
import hashlib
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..config import settings
from .nn_core import (
    Activation,
    DenseLayer,
    DenseStack,
    ParameterMask,
    load_layers,
    save_layers,
)


class EEQNetwork:
    """Trunk layers, one exit branch per layer, optional confidence heads."""

    def __init__(
        self,
        state_dim: int,
        action_count: int,
        trunk_width: Optional[int] = None,
        head_width: Optional[int] = None,
    ):
        """
        Create an empty network; layers are added with add_layer.

        Args:
            state_dim: Observation dimension
            action_count: Number of discrete actions
            trunk_width: Hidden width of trunk layers (default from settings)
            head_width: Hidden width of branches and heads (default from settings)
        """
        if state_dim < 1 or action_count < 1:
            raise ValueError("state_dim and action_count must be positive")
        self.state_dim = state_dim
        self.action_count = action_count
        self.trunk_width = trunk_width or settings.trunk_width
        self.head_width = head_width or settings.head_width
        self.trunk: List[DenseLayer] = []
        self.branches: List[List[DenseLayer]] = []
        self.utility_heads: List[List[DenseLayer]] = []
        self.privacy_heads: List[List[DenseLayer]] = []
        self.metadata: Dict[str, Any] = {}

    @property
    def n_layers(self) -> int:
        return len(self.trunk)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def has_heads(self) -> bool:
        return len(self.utility_heads) == self.n_branches and self.n_branches > 0

    @property
    def head_input_dim(self) -> int:
        """Raw state, trunk features at the branch's layer, one-hot action."""
        return self.state_dim + self.trunk_width + self.action_count

    def add_layer(self, rng: np.random.Generator) -> int:
        """
        Append a freshly initialized trunk layer and its exit branch.

        Args:
            rng: Initialization generator

        Returns:
            Index of the new branch
        """
        i = self.n_layers
        in_dim = self.state_dim if i == 0 else self.trunk_width
        self.trunk.append(DenseLayer(f"trunk.{i}", in_dim, self.trunk_width, Activation.RELU, rng))
        self.branches.append(
            [
                DenseLayer(f"branch.{i}.0", self.trunk_width, self.head_width, Activation.RELU, rng),
                DenseLayer(f"branch.{i}.1", self.head_width, self.action_count, Activation.LINEAR, rng),
            ]
        )
        return i

    def _head(self, kind: str, i: int, rng: np.random.Generator) -> List[DenseLayer]:
        return [
            DenseLayer(f"{kind}.{i}.0", self.head_input_dim, self.head_width, Activation.RELU, rng),
            DenseLayer(f"{kind}.{i}.1", self.head_width, 1, Activation.SIGMOID, rng),
        ]

    def attach_confidence_heads(self, rng: np.random.Generator) -> None:
        """(Re)create a utility and a privacy head for every branch."""
        self.utility_heads = [self._head("utility", i, rng) for i in range(self.n_branches)]
        self.privacy_heads = [self._head("privacy", i, rng) for i in range(self.n_branches)]

    def _check_branch(self, branch: int) -> None:
        if not 0 <= branch < self.n_branches:
            raise ValueError(f"branch {branch} out of range (network has {self.n_branches} branches)")

    def exit_stack(self, branch: int) -> DenseStack:
        """Trunk layers 0..branch followed by the branch, sharing layer objects."""
        self._check_branch(branch)
        return DenseStack(self.trunk[: branch + 1] + self.branches[branch])

    def trunk_features(self, obs: Any, upto: Optional[int] = None) -> List[np.ndarray]:
        """
        Activations after each trunk layer.

        Args:
            obs: Observation [state_dim] or batch [N x state_dim]
            upto: Last trunk index to evaluate (default all)

        Returns:
            One array per evaluated trunk layer
        """
        last = self.n_layers - 1 if upto is None else upto
        out = np.asarray(obs, dtype=np.float64)
        if out.shape[-1] != self.state_dim:
            raise ValueError(f"observation dimension mismatch: expected {self.state_dim}, got {out.shape}")
        feats = []
        for layer in self.trunk[: last + 1]:
            _, out = layer.forward(out)
            feats.append(out)
        return feats

    def _branch_forward(self, branch: int, feat: np.ndarray) -> np.ndarray:
        out = feat
        for layer in self.branches[branch]:
            _, out = layer.forward(out)
        return out

    def q_values(self, obs: Any, branch: int) -> np.ndarray:
        """
        Q-estimates of one exit; only trunk layers up to the branch are evaluated.

        Args:
            obs: Observation or batch
            branch: Exit index

        Returns:
            [action_count] or [N x action_count]
        """
        self._check_branch(branch)
        feats = self.trunk_features(obs, upto=branch)
        return self._branch_forward(branch, feats[-1])

    def q_all(self, obs: Any) -> np.ndarray:
        """Q-values of every branch from a single trunk pass: [B x A] or [N x B x A]."""
        feats = self.trunk_features(obs)
        qs = [self._branch_forward(i, f) for i, f in enumerate(feats)]
        return np.stack(qs, axis=-2)

    def head_inputs(self, obs: Any, feats: np.ndarray, actions: Any) -> np.ndarray:
        """Concatenate raw state, trunk features and one-hot actions."""
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        feats = np.atleast_2d(feats)
        onehot = np.zeros((obs.shape[0], self.action_count))
        onehot[np.arange(obs.shape[0]), np.asarray(actions, dtype=np.int64).reshape(-1)] = 1.0
        return np.concatenate([obs, feats, onehot], axis=1)

    def utility_stack(self, branch: int) -> DenseStack:
        self._check_branch(branch)
        return DenseStack(self.utility_heads[branch])

    def privacy_stack(self, branch: int) -> DenseStack:
        self._check_branch(branch)
        return DenseStack(self.privacy_heads[branch])

    def confidence(self, obs: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Greedy action, utility probability and privacy probability of every branch.

        One trunk pass serves all branches.

        Args:
            obs: Single observation

        Returns:
            (greedy actions [B], utility probs [B], privacy probs [B])
        """
        if not self.has_heads:
            raise ValueError("confidence heads have not been trained")
        feats = self.trunk_features(obs)
        greedy = np.empty(self.n_branches, dtype=np.int64)
        u_prob = np.empty(self.n_branches)
        p_prob = np.empty(self.n_branches)
        for i, f in enumerate(feats):
            q = self._branch_forward(i, f[None, :] if f.ndim == 1 else f)[0]
            greedy[i] = int(np.argmax(q))
            x = self.head_inputs(obs, f, [greedy[i]])
            u_prob[i] = self.utility_stack(i).forward(x)[0, 0]
            p_prob[i] = self.privacy_stack(i).forward(x)[0, 0]
        return greedy, u_prob, p_prob

    def flops(self, branch: int) -> int:
        """Multiply-add count of an early exit at the given branch."""
        return self.exit_stack(branch).flops()

    def q_layers(self) -> List[DenseLayer]:
        """Trunk and branch layers."""
        return self.trunk + [layer for branch in self.branches for layer in branch]

    def all_layers(self) -> List[DenseLayer]:
        """Every layer in checkpoint declaration order."""
        heads = [layer for head in self.utility_heads + self.privacy_heads for layer in head]
        return self.q_layers() + heads

    def frozen_before(self, stage: int) -> ParameterMask:
        """Mask covering trunk layers and branches with index below the stage."""
        names = {layer.name for layer in self.trunk[:stage]}
        for branch in self.branches[:stage]:
            names.update(layer.name for layer in branch)
        return ParameterMask(frozen=names)

    def parameter_digest(self, names: Optional[List[str]] = None) -> str:
        """SHA-256 over the raw parameters of the selected (default all) layers."""
        digest = hashlib.sha256()
        for layer in self.all_layers():
            if names is not None and layer.name not in names:
                continue
            digest.update(layer.name.encode("utf-8"))
            digest.update(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            digest.update(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        return digest.hexdigest()

    def stage_digest(self, stage: int) -> str:
        """Digest of trunk layer and branch at one stage."""
        names = [f"trunk.{stage}"] + [layer.name for layer in self.branches[stage]]
        return self.parameter_digest(names)

    def copy(self) -> "EEQNetwork":
        return copy.deepcopy(self)

    def index_table(self) -> Dict[str, Any]:
        """Map of trunk layers, branches and heads to layer names."""
        return {
            "trunk": [layer.name for layer in self.trunk],
            "branches": [[layer.name for layer in b] for b in self.branches],
            "utility_heads": [[layer.name for layer in h] for h in self.utility_heads],
            "privacy_heads": [[layer.name for layer in h] for h in self.privacy_heads],
        }

    def save(self, path: Path, metadata: Optional[Dict[str, Any]] = None) -> None:
        """
        Write the network as a checkpoint.

        Args:
            path: Destination file
            metadata: Extra JSON metadata (must be deterministic for reproducible bytes)
        """
        meta = {
            "state_dim": self.state_dim,
            "action_count": self.action_count,
            "trunk_width": self.trunk_width,
            "head_width": self.head_width,
            "index": self.index_table(),
            "extra": metadata or {},
        }
        save_layers(path, self.all_layers(), meta)
        logger.info(f"Saved {self.n_branches}-branch network to {path}")

    @classmethod
    def load(cls, path: Path) -> "EEQNetwork":
        """Rebuild a network from a checkpoint."""
        layers, meta = load_layers(path)
        by_name = {layer.name: layer for layer in layers}
        net = cls(meta["state_dim"], meta["action_count"], meta["trunk_width"], meta["head_width"])
        index = meta["index"]
        net.trunk = [by_name[n] for n in index["trunk"]]
        net.branches = [[by_name[n] for n in b] for b in index["branches"]]
        net.utility_heads = [[by_name[n] for n in h] for h in index["utility_heads"]]
        net.privacy_heads = [[by_name[n] for n in h] for h in index["privacy_heads"]]
        net.metadata = meta.get("extra", {})
        return net


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, rng: np.random.Generator):
        """Preallocate storage."""
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, s: np.ndarray, a: int, r: float, s_next: np.ndarray, done: bool) -> None:
        """Store one transition, overwriting the oldest when full."""
        i = self._next
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s_next
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        """Uniform indices (with replacement) over stored transitions."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        return self.rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(states, actions, rewards, next_states, dones) of a uniform minibatch."""
        idx = self.sample_indices(batch_size)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx]
