"""
VR classroom: an 8-state learner model (alertness, fatigue, vertigo bits)
driven by lecture-delivery actions, with quiz-score rewards.
"""

from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..utils.validators import validate_columns
from .base import Environment, StepResult

N_STATES = 8
STAGES_PER_LECTURE = 5


class VRAction(IntEnum):
    """Lecture-delivery actions."""
    BREAK = 0
    ENABLE_VR = 1
    DISABLE_VR = 2
    CHANGE_CONTENT = 3
    NO_CHANGE = 4


class VRMode(IntEnum):
    """Content presentation mode."""
    TWO_D = 0
    THREE_D = 1


class VRTolerance(str, Enum):
    """How well a learner tolerates 3D exposure."""
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


class VRState(BaseModel):
    """Learner bits plus lecture context. ``vl=0`` marks vertigo, ``fl=0`` a rested learner."""

    model_config = ConfigDict(frozen=True)

    al: int = Field(..., ge=0, le=1, description="Alertness level")
    fl: int = Field(..., ge=0, le=1, description="Fatigue level")
    vl: int = Field(..., ge=0, le=1, description="Vertigo level")
    mode: VRMode = VRMode.TWO_D
    stage: int = Field(default=0, ge=0)

    @property
    def state_id(self) -> int:
        """S1..S8 with S8 = (1, 1, 1)."""
        return 4 * self.al + 2 * self.fl + self.vl + 1

    @property
    def index(self) -> int:
        return self.state_id - 1

    @classmethod
    def from_index(cls, index: int, mode: VRMode = VRMode.TWO_D, stage: int = 0) -> "VRState":
        return cls(al=(index >> 2) & 1, fl=(index >> 1) & 1, vl=index & 1, mode=mode, stage=stage)


class BitModel(BaseModel):
    """Per-bit next-state probabilities from which the profile matrices are assembled."""

    alert_2d: Tuple[float, float] = (0.3, 0.7)      # P(al'=1 | al=0), P(al'=1 | al=1)
    alert_3d: Tuple[float, float] = (0.6, 0.9)
    alert_break: float = 0.75
    content_boost: float = 0.2
    content_cap: float = 0.95
    fatigue_2d: Tuple[float, float] = (0.2, 0.7)    # P(fl'=1 | fl=0), P(fl'=1 | fl=1)
    fatigue_3d: Tuple[float, float] = (0.3, 0.8)
    fatigue_break: float = 0.1
    vertigo_2d: Tuple[float, float] = (0.3, 0.02)   # P(vl'=0 | vl=0), P(vl'=0 | vl=1)
    vertigo_3d: Tuple[float, float] = (0.6, 0.2)
    vertigo_break: float = 0.1


TOLERANCE_VERTIGO = {
    VRTolerance.HIGH: (0.4, 0.05),
    VRTolerance.MEDIUM: (0.6, 0.2),
    VRTolerance.LOW: (0.8, 0.4),
}
PROFILE_TOLERANCE = {"P1": VRTolerance.HIGH, "P2": VRTolerance.MEDIUM, "P3": VRTolerance.LOW}


def next_mode(mode: VRMode, action: VRAction) -> VRMode:
    """Enable/disable switch the mode deterministically; other actions keep it."""
    if action == VRAction.ENABLE_VR:
        return VRMode.THREE_D
    if action == VRAction.DISABLE_VR:
        return VRMode.TWO_D
    return mode


def _row(bits: BitModel, state: VRState, action: VRAction, mode_after: VRMode) -> np.ndarray:
    if action == VRAction.BREAK:
        p_al1 = bits.alert_break
        p_fl1 = bits.fatigue_break
        p_vl0 = bits.vertigo_break
    else:
        three_d = mode_after == VRMode.THREE_D
        p_al1 = (bits.alert_3d if three_d else bits.alert_2d)[state.al]
        if action == VRAction.CHANGE_CONTENT:
            p_al1 = min(p_al1 + bits.content_boost, bits.content_cap)
        p_fl1 = (bits.fatigue_3d if three_d else bits.fatigue_2d)[state.fl]
        p_vl0 = (bits.vertigo_3d if three_d else bits.vertigo_2d)[state.vl]

    row = np.empty(N_STATES)
    for j in range(N_STATES):
        nxt = VRState.from_index(j)
        row[j] = (
            (p_al1 if nxt.al else 1.0 - p_al1)
            * (p_fl1 if nxt.fl else 1.0 - p_fl1)
            * (1.0 - p_vl0 if nxt.vl else p_vl0)
        )
    return row


class ProfileMDP:
    """Transition tensor ``P[mode, action, s, s']`` for one tolerance profile."""

    def __init__(self, name: str, tolerance: VRTolerance, transitions: np.ndarray):
        """Wrap and validate a transition tensor of shape [2, 5, 8, 8]."""
        self.name = name
        self.tolerance = VRTolerance(tolerance)
        self.transitions = np.asarray(transitions, dtype=np.float64)
        self.validate()

    @classmethod
    def from_bits(cls, name: str, tolerance: VRTolerance, bits: BitModel) -> "ProfileMDP":
        tensor = np.zeros((len(VRMode), len(VRAction), N_STATES, N_STATES))
        for mode in VRMode:
            for action in VRAction:
                after = next_mode(mode, action)
                for s in range(N_STATES):
                    tensor[mode, action, s] = _row(bits, VRState.from_index(s, mode), action, after)
        return cls(name, tolerance, tensor)

    def validate(self) -> None:
        """Every row must be a probability vector."""
        expected = (len(VRMode), len(VRAction), N_STATES, N_STATES)
        if self.transitions.shape != expected:
            raise ValueError(f"{self.name}: transition tensor shape {self.transitions.shape}, expected {expected}")
        if np.any(self.transitions < 0):
            raise ValueError(f"{self.name}: negative transition probability")
        sums = self.transitions.sum(axis=-1)
        if not np.allclose(sums, 1.0, atol=1e-12):
            raise ValueError(f"{self.name}: rows do not sum to one (max error {np.abs(sums - 1).max():.3g})")

    def row(self, state: VRState, action: VRAction) -> np.ndarray:
        return self.transitions[state.mode, action, state.index]

    def vertigo_onset(self, mode: VRMode = VRMode.THREE_D) -> float:
        """P(vl'=0) from a vertigo-free state under continued exposure in a mode."""
        row = self.transitions[mode, VRAction.NO_CHANGE, VRState(al=1, fl=0, vl=1).index]
        return float(sum(row[j] for j in range(N_STATES) if VRState.from_index(j).vl == 0))

    def stationary_distribution(self, mode: VRMode, action: VRAction = VRAction.NO_CHANGE) -> np.ndarray:
        """Left eigenvector of eigenvalue one of a fixed-action chain."""
        matrix = self.transitions[mode, action]
        values, vectors = np.linalg.eig(matrix.T)
        vec = np.real(vectors[:, np.argmin(np.abs(values - 1.0))])
        return vec / vec.sum()

    def to_frame(self) -> pd.DataFrame:
        """Long form: profile, tolerance, mode, action, state, then S1..S8 probabilities."""
        rows = []
        for mode in VRMode:
            for action in VRAction:
                for s in range(N_STATES):
                    row: Dict[str, Any] = {
                        "profile": self.name,
                        "tolerance": self.tolerance.value,
                        "mode": mode.name,
                        "action": action.name,
                        "state": f"S{s + 1}",
                    }
                    row.update({f"S{j + 1}": self.transitions[mode, action, s, j] for j in range(N_STATES)})
                    rows.append(row)
        return pd.DataFrame(rows)

    def dump_csv(self, path: Path) -> None:
        # repr precision keeps the round trip exact
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def load_csv(cls, path: Path) -> "ProfileMDP":
        frame = validate_columns(
            pd.read_csv(path),
            ["profile", "tolerance", "mode", "action", "state"] + [f"S{j + 1}" for j in range(N_STATES)],
            str(path),
        )
        tensor = np.zeros((len(VRMode), len(VRAction), N_STATES, N_STATES))
        for rec in frame.to_dict(orient="records"):
            s = int(str(rec["state"])[1:]) - 1
            tensor[VRMode[rec["mode"]], VRAction[rec["action"]], s] = [rec[f"S{j + 1}"] for j in range(N_STATES)]
        first = frame.iloc[0]
        return cls(str(first["profile"]), VRTolerance(first["tolerance"]), tensor)


def make_profiles(seed: int, jitter: float = 0.02) -> Dict[str, ProfileMDP]:
    """
    Build P1 (high), P2 (medium) and P3 (low tolerance).

    Every bit probability is perturbed by at most ``jitter``; the vertigo
    gaps between tolerances are wider than twice the jitter so the ordering
    always holds.

    Args:
        seed: Seed for the perturbations
        jitter: Maximum absolute perturbation

    Returns:
        Profiles keyed P1, P2, P3
    """
    rng = np.random.default_rng(seed)

    def nudge(p: float) -> float:
        return float(np.clip(p + rng.uniform(-jitter, jitter), 0.01, 0.99))

    profiles = {}
    for name, tolerance in PROFILE_TOLERANCE.items():
        base = BitModel(vertigo_3d=TOLERANCE_VERTIGO[tolerance])
        data = {}
        for field, value in base.model_dump().items():
            if field in ("content_boost", "content_cap"):
                data[field] = value
            elif isinstance(value, (tuple, list)):
                data[field] = tuple(nudge(v) for v in value)
            else:
                data[field] = nudge(value)
        profiles[name] = ProfileMDP.from_bits(name, tolerance, BitModel(**data))
        logger.debug(f"Built VR profile {name} ({tolerance.value}), 3D vertigo onset {profiles[name].vertigo_onset():.3f}")
    return profiles


class QuizReward(BaseModel):
    """Stage quiz score in [0, 100] around a per-state expectation."""

    base: float = 20.0
    alert_weight: float = 45.0
    fatigue_weight: float = 10.0
    vertigo_weight: float = 25.0
    noise_sd: float = Field(default=5.0, ge=0)

    def expected(self, state: VRState) -> float:
        return self.base + self.alert_weight * state.al + self.fatigue_weight * state.fl + self.vertigo_weight * state.vl

    def sample(self, state: VRState, rng: np.random.Generator) -> float:
        return float(np.clip(rng.normal(self.expected(state), self.noise_sd), 0.0, 100.0))


class VRClassroomEnv(Environment):
    """Five-stage lectures; one step per stage, episode ends after the last stage."""

    observation_dim = N_STATES + 2
    action_count = len(VRAction)
    n_states = N_STATES
    n_states_coarse = N_STATES
    steps_per_day = STAGES_PER_LECTURE
    reward_scale = 0.01
    k_max = 10

    def __init__(
        self,
        profile: ProfileMDP,
        rng: np.random.Generator,
        reward: Optional[QuizReward] = None,
        stages: int = STAGES_PER_LECTURE,
    ):
        """
        Initialize the classroom.

        Args:
            profile: Learner transition model
            rng: Generator for state sampling and quiz noise
            reward: Quiz score model
            stages: Stages per lecture
        """
        super().__init__(rng)
        self.profile = profile
        self.reward = reward or QuizReward()
        self.stages = stages
        self.lecture = -1
        self.state = VRState(al=1, fl=0, vl=1)

    def initial_state(self) -> VRState:
        """Learners usually start alert, rested and free of vertigo, in 2D."""
        return VRState(
            al=int(self.rng.random() < 0.7),
            fl=int(self.rng.random() >= 0.8),
            vl=int(self.rng.random() < 0.95),
            mode=VRMode.TWO_D,
            stage=0,
        )

    def observation(self, state: Optional[VRState] = None) -> np.ndarray:
        st = state or self.state
        obs = np.zeros(self.observation_dim)
        obs[st.index] = 1.0
        obs[N_STATES] = float(st.mode)
        obs[N_STATES + 1] = st.stage / self.stages
        return obs

    def reset(self) -> np.ndarray:
        self.lecture += 1
        self.state = self.initial_state()
        return self.observation()

    def switch_profile(self, profile: ProfileMDP) -> None:
        """Replace the learner model; the current lecture continues under it."""
        logger.info(f"Learner switched from {self.profile.name} to {profile.name} in lecture {self.lecture}")
        self.profile = profile

    def action_value(self, action: int) -> float:
        return float(action)

    def transition(self, state: VRState, action: int) -> Tuple[VRMode, np.ndarray]:
        """Mode after the action and the next-state distribution over S1..S8."""
        act = VRAction(self.check_action(action))
        return next_mode(state.mode, act), self.profile.row(state, act)

    def step(self, action: int) -> StepResult:
        current = self.state
        mode, probs = self.transition(current, action)
        nxt = int(self.rng.choice(N_STATES, p=probs))
        self.state = VRState.from_index(nxt, mode=mode, stage=current.stage + 1)
        score = self.reward.sample(self.state, self.rng)
        done = self.state.stage >= self.stages
        info: Dict[str, Any] = {
            "s_id": current.index,
            "s_coarse": current.index,
            "truth": current.index,
            "phase": current.stage,
            "day": max(self.lecture, 0),
            "a_value": self.action_value(action),
            "utility": score,
            "truncated": False,
        }
        return self.observation(), score, done, info

    def utility_summary(self, utilities: Sequence[float]) -> Dict[str, float]:
        """Mean quiz score ranks branches."""
        values = np.asarray(utilities, dtype=np.float64)
        if values.size == 0:
            return {"score": 0.0, "mean": 0.0, "std": 0.0}
        return {"score": float(values.mean()), "mean": float(values.mean()), "std": float(values.std())}
