"""
Minimal dense feed-forward networks with backpropagation.
Provides layers, optimizers, parameter freezing and a versioned checkpoint format.
"""

import copy
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np
from loguru import logger

from ..utils.validators import ensure_finite, validate_vector

CHECKPOINT_MAGIC = b"PEARLNN\x00"
CHECKPOINT_VERSION = 1
BCE_CLAMP = 1e-7


class Activation(str, Enum):
    """Layer activations."""
    RELU = "relu"
    LINEAR = "linear"
    SIGMOID = "sigmoid"


ACTIVATION_CODES = {Activation.RELU: 0, Activation.LINEAR: 1, Activation.SIGMOID: 2}
CODE_ACTIVATIONS = {v: k for k, v in ACTIVATION_CODES.items()}


class LossKind(str, Enum):
    """Supported losses."""
    MSE = "mse"
    BCE = "bce"


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.RELU:
        return np.maximum(z, 0.0)
    if activation == Activation.SIGMOID:
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.RELU:
        return (z > 0).astype(np.float64)
    if activation == Activation.SIGMOID:
        return a * (1.0 - a)
    return np.ones_like(z)


class DenseLayer:
    """Fully connected layer ``a = act(W x + b)`` with W of shape [out x in]."""

    def __init__(
        self,
        name: str,
        in_dim: int,
        out_dim: int,
        activation: Activation = Activation.RELU,
        rng: Optional[np.random.Generator] = None,
    ):
        """
        Initialize weights (He for relu, Xavier otherwise) and zero bias.

        Args:
            name: Unique layer identifier used by masks, optimizers and checkpoints
            in_dim: Input dimension
            out_dim: Output dimension
            activation: Activation function
            rng: Generator for initialization (zeros when None)
        """
        if in_dim < 1 or out_dim < 1:
            raise ValueError(f"layer {name}: dimensions must be positive ({in_dim}, {out_dim})")
        self.name = name
        self.activation = Activation(activation)
        self.bias = np.zeros(out_dim, dtype=np.float64)
        if rng is None:
            self.weights = np.zeros((out_dim, in_dim), dtype=np.float64)
        elif self.activation == Activation.RELU:
            self.weights = rng.normal(0.0, np.sqrt(2.0 / in_dim), size=(out_dim, in_dim))
        else:
            limit = np.sqrt(6.0 / (in_dim + out_dim))
            self.weights = rng.uniform(-limit, limit, size=(out_dim, in_dim))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return (pre-activation, activation) for a batch [N x in]."""
        z = x @ self.weights.T + self.bias
        return z, _activate(z, self.activation)

    def flops(self) -> int:
        """Multiply-add count of one forward pass."""
        return 2 * self.in_dim * self.out_dim

    def __repr__(self) -> str:
        return f"DenseLayer({self.name}, {self.in_dim}->{self.out_dim}, {self.activation.value})"


@dataclass
class ParameterMask:
    """Layers whose parameters must not change."""

    frozen: Set[str] = field(default_factory=set)

    def is_frozen(self, name: str) -> bool:
        return name in self.frozen


class Optimizer:
    """SGD or Adam keyed by layer name, so state survives across stacks sharing layers."""

    def __init__(
        self,
        kind: str = "adam",
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        """Initialize optimizer state."""
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind '{kind}'")
        self.kind = kind
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.moments: Dict[str, Dict[str, np.ndarray]] = {}
        self.steps: Dict[str, int] = {}

    def step(self, layers: List[DenseLayer], grads: Dict[str, Tuple[np.ndarray, np.ndarray]], mask: ParameterMask) -> None:
        """Apply one update to every non-frozen layer that has a gradient."""
        for layer in layers:
            if mask.is_frozen(layer.name) or layer.name not in grads:
                continue
            d_w, d_b = grads[layer.name]
            if self.kind == "sgd":
                layer.weights -= self.learning_rate * d_w
                layer.bias -= self.learning_rate * d_b
                continue

            state = self.moments.get(layer.name)
            if state is None:
                state = {
                    "mw": np.zeros_like(layer.weights),
                    "vw": np.zeros_like(layer.weights),
                    "mb": np.zeros_like(layer.bias),
                    "vb": np.zeros_like(layer.bias),
                }
                self.moments[layer.name] = state
            t = self.steps.get(layer.name, 0) + 1
            self.steps[layer.name] = t

            state["mw"] = self.beta1 * state["mw"] + (1 - self.beta1) * d_w
            state["vw"] = self.beta2 * state["vw"] + (1 - self.beta2) * d_w**2
            state["mb"] = self.beta1 * state["mb"] + (1 - self.beta1) * d_b
            state["vb"] = self.beta2 * state["vb"] + (1 - self.beta2) * d_b**2
            c1 = 1 - self.beta1**t
            c2 = 1 - self.beta2**t
            layer.weights -= self.learning_rate * (state["mw"] / c1) / (np.sqrt(state["vw"] / c2) + self.eps)
            layer.bias -= self.learning_rate * (state["mb"] / c1) / (np.sqrt(state["vb"] / c2) + self.eps)


class DenseStack:
    """
    Sequence of dense layers evaluated in order.

    Layers are held by reference: an exit path of the early-exit network is a
    stack whose leading layers are shared with other paths.
    """

    def __init__(self, layers: List[DenseLayer]):
        """Initialize from an ordered list of layers."""
        if not layers:
            raise ValueError("a stack needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(f"{prev.name} output {prev.out_dim} does not feed {nxt.name} input {nxt.in_dim}")
        self.layers = layers

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def forward(self, x: Any) -> np.ndarray:
        """
        Evaluate the stack.

        Args:
            x: Input vector [in] or batch [N x in]

        Returns:
            Final activations, same leading shape as the input
        """
        arr = validate_vector(x, self.in_dim)
        single = arr.ndim == 1
        out = arr[None, :] if single else arr
        for layer in self.layers:
            _, out = layer.forward(out)
        return out[0] if single else out

    def _forward_cached(self, x: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        cache = [(x, x)]
        out = x
        for layer in self.layers:
            z, out = layer.forward(out)
            cache.append((z, out))
        return cache

    def loss_and_gradients(
        self,
        x: Any,
        target: Any,
        loss_kind: LossKind = LossKind.MSE,
        weights: Optional[np.ndarray] = None,
    ) -> Tuple[float, Dict[str, Tuple[np.ndarray, np.ndarray]]]:
        """
        Forward pass, loss and backpropagated gradients.

        The loss is ``sum(w * l) / N`` over a batch of N rows where ``l`` is the
        squared error (mse) or binary cross-entropy (bce) per output and ``w``
        defaults to ``1 / out_dim``.

        Args:
            x: Input batch [N x in] (or a single vector)
            target: Target batch [N x out]
            loss_kind: mse or bce
            weights: Optional per-output weights [N x out]

        Returns:
            (loss, gradients keyed by layer name as (dW, db))
        """
        xb = np.atleast_2d(validate_vector(x, self.in_dim))
        tb = np.atleast_2d(validate_vector(target, self.out_dim, "target"))
        if tb.shape[0] != xb.shape[0]:
            raise ValueError(f"target batch {tb.shape[0]} does not match input batch {xb.shape[0]}")
        n = xb.shape[0]
        w = np.full(tb.shape, 1.0 / self.out_dim) if weights is None else np.atleast_2d(weights).astype(np.float64)

        cache = self._forward_cached(xb)
        z_out, y = cache[-1]
        last = self.layers[-1]
        loss_kind = LossKind(loss_kind)

        if loss_kind == LossKind.MSE:
            diff = y - tb
            loss = float(np.sum(w * diff**2) / n)
            delta = (2.0 * w * diff / n) * _activation_grad(z_out, y, last.activation)
        else:
            if np.any(y < 0.0) or np.any(y > 1.0):
                raise ValueError("bce requires outputs in [0, 1]; use a sigmoid output layer")
            yc = np.clip(y, BCE_CLAMP, 1.0 - BCE_CLAMP)
            loss = float(-np.sum(w * (tb * np.log(yc) + (1.0 - tb) * np.log(1.0 - yc))) / n)
            if last.activation == Activation.SIGMOID:
                delta = w * (y - tb) / n
            else:
                delta = (w * (yc - tb) / (yc * (1.0 - yc)) / n) * _activation_grad(z_out, y, last.activation)

        grads: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            a_prev = cache[idx][1]
            grads[layer.name] = (delta.T @ a_prev, delta.sum(axis=0))
            if idx > 0:
                z_prev, out_prev = cache[idx]
                delta = (delta @ layer.weights) * _activation_grad(z_prev, out_prev, self.layers[idx - 1].activation)
        return loss, grads

    def backward_and_step(
        self,
        x: Any,
        target: Any,
        loss_kind: LossKind,
        optimizer: Optimizer,
        mask: Optional[ParameterMask] = None,
        weights: Optional[np.ndarray] = None,
    ) -> float:
        """
        One gradient step on the non-frozen layers.

        Args:
            x: Input batch
            target: Target batch
            loss_kind: mse or bce
            optimizer: Optimizer holding per-layer state
            mask: Frozen layers (left bit-identical)
            weights: Optional per-output loss weights

        Returns:
            Loss before the update
        """
        loss, grads = self.loss_and_gradients(x, target, loss_kind, weights)
        ensure_finite(loss, "training loss", {"layers": [layer.name for layer in self.layers]})
        optimizer.step(self.layers, grads, mask or ParameterMask())
        return loss

    def flops(self) -> int:
        return sum(layer.flops() for layer in self.layers)

    def copy(self) -> "DenseStack":
        """Independent deep copy (no shared layers)."""
        return DenseStack(copy.deepcopy(self.layers))


def save_layers(path: Path, layers: List[DenseLayer], metadata: Optional[Dict[str, Any]] = None) -> None:
    """
    Write layers to a versioned checkpoint.

    Layout: magic, version (u32), metadata length (u32) + JSON, layer count
    (u32), per-layer header (in u32, out u32, activation u8, name length u16,
    name), then each layer's weights and bias as little-endian float64.

    Args:
        path: Destination file
        layers: Layers in declaration order
        metadata: JSON-serializable metadata stored in the header
    """
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(layers)))
        for layer in layers:
            name = layer.name.encode("utf-8")
            fh.write(struct.pack("<IIBH", layer.in_dim, layer.out_dim, ACTIVATION_CODES[layer.activation], len(name)))
            fh.write(name)
        for layer in layers:
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    logger.debug(f"Saved {len(layers)} layers to {path}")


def load_layers(path: Path) -> Tuple[List[DenseLayer], Dict[str, Any]]:
    """
    Read a checkpoint written by save_layers.

    Args:
        path: Checkpoint file

    Returns:
        (layers in declaration order, metadata)
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a PEaRL checkpoint")
    offset = len(CHECKPOINT_MAGIC)
    version, meta_len = struct.unpack_from("<II", blob, offset)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset += 8
    metadata = json.loads(blob[offset: offset + meta_len].decode("utf-8"))
    offset += meta_len
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4

    headers = []
    for _ in range(count):
        in_dim, out_dim, code, name_len = struct.unpack_from("<IIBH", blob, offset)
        offset += struct.calcsize("<IIBH")
        name = blob[offset: offset + name_len].decode("utf-8")
        offset += name_len
        headers.append((name, in_dim, out_dim, CODE_ACTIVATIONS[code]))

    layers = []
    for name, in_dim, out_dim, activation in headers:
        layer = DenseLayer(name, in_dim, out_dim, activation)
        n_w = in_dim * out_dim
        layer.weights = np.frombuffer(blob, dtype="<f8", count=n_w, offset=offset).reshape(out_dim, in_dim).astype(np.float64)
        offset += 8 * n_w
        layer.bias = np.frombuffer(blob, dtype="<f8", count=out_dim, offset=offset).astype(np.float64)
        offset += 8 * out_dim
        layers.append(layer)
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes")
    return layers, metadata
