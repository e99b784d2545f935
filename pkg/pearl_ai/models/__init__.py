"""Numerical models for PEaRL."""

from .nn_core import Activation, DenseLayer, DenseStack, LossKind, Optimizer, ParameterMask
from .ee_qnet import EEQNetwork, ReplayBuffer

__all__ = [
    "Activation",
    "DenseLayer",
    "DenseStack",
    "LossKind",
    "Optimizer",
    "ParameterMask",
    "EEQNetwork",
    "ReplayBuffer",
]
