"""Simulated human-centric environments."""

from typing import Any, Dict, Optional

import numpy as np

from ..schemas.budgets import EnvKind
from .base import Environment
from .thermal_house import HouseParams, ThermalHouseEnv, generate_profiles
from .toy import TwoStateMDP
from .vr_classroom import VRClassroomEnv, make_profiles

# profile construction seed; the routines and learner models are fixed across runs
PROFILE_SEED = 7


def make_environment(
    kind: EnvKind,
    human: str,
    rng: np.random.Generator,
    house: Optional[Dict[str, Any]] = None,
) -> Environment:
    """
    Build an environment for an experiment.

    Args:
        kind: Environment kind
        human: Profile id (H1-H3, P1-P3, toy)
        rng: Environment random stream
        house: Thermal house parameter overrides

    Returns:
        Environment instance
    """
    kind = EnvKind(kind)
    if kind == EnvKind.THERMAL:
        return ThermalHouseEnv(profile_for(kind, human), rng, HouseParams(**(house or {})))
    if kind == EnvKind.VR:
        return VRClassroomEnv(profile_for(kind, human), rng)
    return TwoStateMDP(rng)


def profile_for(kind: EnvKind, name: str):
    """Occupant routine (thermal) or learner model (VR) by id."""
    kind = EnvKind(kind)
    if kind == EnvKind.THERMAL:
        return generate_profiles(PROFILE_SEED)[name]
    if kind == EnvKind.VR:
        return make_profiles(PROFILE_SEED)[name]
    raise ValueError(f"environment {kind.value} has no switchable profiles")


__all__ = [
    "Environment",
    "HouseParams",
    "ThermalHouseEnv",
    "TwoStateMDP",
    "VRClassroomEnv",
    "generate_profiles",
    "make_environment",
    "make_profiles",
    "profile_for",
]
