"""
Data records exchanged between training, labelling, inference and the adversary.
"""

from datetime import datetime, timezone
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from ..utils.validators import validate_columns


class UtilityLabelRecord(BaseModel):
    """Utility buffer entry: visited state, executed action, one UCL per branch."""

    s: List[float]
    a: int
    ucl: List[int]
    q_max: List[float] = Field(default_factory=list, description="Per-branch max Q at s")


class PrivacyLabelRecord(BaseModel):
    """Privacy buffer entry: labels broadcast from the MI window the pair fell in."""

    s: List[float]
    a: int
    pcl: List[int]
    window: int = Field(default=0, description="Index of the MI window")


class MIPoint(BaseModel):
    """One windowed MI value."""

    branch: int = Field(default=-1, description="Exit branch, -1 for the executed (mixed) trace")
    window_start: int
    i_bits: float = Field(..., ge=0)
    i_max_so_far: float = Field(..., ge=0)


class MISeries(BaseModel):
    """Windowed MI values and their running maximum."""

    points: List[MIPoint] = Field(default_factory=list)
    i_max: float = 0.0

    def for_branch(self, branch: int) -> List[float]:
        """MI values of one branch in window order."""
        return [pt.i_bits for pt in self.points if pt.branch == branch]

    def to_frame(self) -> pd.DataFrame:
        """Columns: branch, window_start, I_bits, I_max_so_far."""
        return pd.DataFrame(
            {
                "branch": [pt.branch for pt in self.points],
                "window_start": [pt.window_start for pt in self.points],
                "I_bits": [pt.i_bits for pt in self.points],
                "I_max_so_far": [pt.i_max_so_far for pt in self.points],
            }
        )


class TraceEntry(BaseModel):
    """One served decision."""

    t: int
    s_id: int
    s_coarse: int
    a_id: int
    a_value: float = Field(..., description="Raw action value shared with the cloud (setpoint or action id)")
    branch: int
    feasible: bool = True
    reward: float = 0.0
    utility: float = Field(default=0.0, description="PMV (thermal) or quiz score (VR) after the step")
    truth: int = Field(default=0, description="Ground-truth behaviour label (activity or human state)")
    phase: int = Field(default=0, description="Hour of day (thermal) or lecture stage (VR)")
    day: int = 0
    i_current: Optional[float] = None
    trigger: bool = False


TRACE_COLUMNS = ["t", "s_id", "a_id", "branch", "feasible", "i_current", "trigger"]
GROUND_TRUTH_COLUMNS = ["t", "truth"]


class ActionTrace(BaseModel):
    """Time-ordered served decisions."""

    entries: List[TraceEntry] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, entry: TraceEntry) -> None:
        """Append an entry; steps must be strictly increasing."""
        if self.entries and entry.t <= self.entries[-1].t:
            raise ValueError(f"trace steps must increase ({entry.t} after {self.entries[-1].t})")
        self.entries.append(entry)

    def pairs(self, coarse: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """State ids and action ids as arrays."""
        s = np.array([e.s_coarse if coarse else e.s_id for e in self.entries], dtype=np.int64)
        a = np.array([e.a_id for e in self.entries], dtype=np.int64)
        return s, a

    def to_frame(self) -> pd.DataFrame:
        """Full trace as a data frame (trace CSV columns first)."""
        frame = pd.DataFrame([e.model_dump() for e in self.entries])
        if frame.empty:
            return pd.DataFrame(columns=list(TraceEntry.model_fields))
        rest = [c for c in frame.columns if c not in TRACE_COLUMNS]
        return frame[TRACE_COLUMNS + rest]

    def ground_truth_frame(self) -> pd.DataFrame:
        """Columns: t, truth."""
        return pd.DataFrame({"t": [e.t for e in self.entries], "truth": [e.truth for e in self.entries]})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, source: str = "trace") -> "ActionTrace":
        """Rebuild a trace from its CSV form."""
        validate_columns(frame, TRACE_COLUMNS, source)
        frame = frame.copy()
        if "s_coarse" not in frame.columns:
            frame["s_coarse"] = frame["s_id"]
        if "a_value" not in frame.columns:
            frame["a_value"] = frame["a_id"]
        frame["i_current"] = frame["i_current"].astype(object).where(frame["i_current"].notna(), None)
        return cls(entries=[TraceEntry(**row) for row in frame.to_dict(orient="records")])


class ExitDecision(BaseModel):
    """Outcome of budgeted exit selection at one state."""

    branch: int
    action: int
    ucl_ok: bool
    pcl_ok: bool
    feasible: bool = True
    utility_score: float = 0.0
    privacy_score: float = 0.0
    greedy_actions: List[int] = Field(default_factory=list, description="Greedy action of every branch at the state")


class ClusteringReport(BaseModel):
    """Adversary output."""

    k_selected: int
    wcss_curve: List[Tuple[int, float]]
    assignments: List[int]
    accuracy: Optional[float] = Field(default=None, ge=0, le=1)
    elbow_confident: bool = True
    features: str = "hourly"

    def to_frame(self) -> pd.DataFrame:
        """Per-sample assignments."""
        return pd.DataFrame({"sample": range(len(self.assignments)), "cluster": self.assignments})

    def summary(self) -> Dict[str, object]:
        """JSON summary without the per-sample assignments."""
        return self.model_dump(exclude={"assignments"})


class BranchScore(BaseModel):
    """Utility and leakage of one exit branch under forced-branch evaluation."""

    branch: int
    score: float = Field(..., description="Environment utility score used to rank branches")
    utility_mean: float
    utility_std: float
    in_range_pct: Optional[float] = None
    mi_bits: float = 0.0


class TradeoffPoint(BaseModel):
    """One budget cell of a sweep."""

    human: str
    u: float
    p: float
    seed: int
    eligible: List[int] = Field(default_factory=list, description="Zero-based eligible branches on true labels")
    accuracy: Optional[float] = None
    utility_mean: float = 0.0
    utility_std: float = 0.0
    in_range_pct: Optional[float] = None
    infeasible_fraction: float = 0.0
    mean_branch: float = 0.0


class DriftReport(BaseModel):
    """Result of the behaviour-switch scenario."""

    switch_day: Optional[float]
    trigger_days: List[float] = Field(default_factory=list)
    recovery_days: Optional[float] = None
    coalesced: int = 0
    mi_curve: List[Dict[str, float]] = Field(default_factory=list)


class RunManifest(BaseModel):
    """Provenance of a run directory."""

    run_id: str
    command: str
    root_seed: int
    config: Dict[str, object]
    checkpoint_sha256: Optional[str] = None
    package_version: str
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class RunReport(BaseModel):
    """Summary assembled from the artifacts of a run directory."""

    run_id: str
    eligibility: Dict[str, Dict[str, str]] = Field(default_factory=dict)
    i_max: Optional[float] = None
    best_branch: Optional[int] = None
    utility: Dict[str, float] = Field(default_factory=dict)
    accuracy_baseline: Optional[float] = None
    accuracy_mitigated: Optional[float] = None
    tradeoff: List[TradeoffPoint] = Field(default_factory=list)
    drift: Optional[DriftReport] = None
