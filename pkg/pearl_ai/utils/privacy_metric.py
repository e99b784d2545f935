"""
Discrete plug-in mutual information between shared actions and private states.
"""

from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..schemas.budgets import MIWindowConfig, StateBinning
from ..schemas.records import ActionTrace, MIPoint, MISeries

PairWindow = Union[Sequence[Tuple[int, int]], np.ndarray]


def _as_pairs(window: PairWindow) -> Tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(window, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"window must be a sequence of (s_id, a_id) pairs, got shape {arr.shape}")
    return arr[:, 0], arr[:, 1]


def mutual_information_arrays(s: np.ndarray, a: np.ndarray, bias_correction: bool = False) -> float:
    """
    Plug-in estimate of I(a; s) in bits from aligned symbol arrays.

    Args:
        s: State ids
        a: Action ids
        bias_correction: Add the Miller-Madow correction

    Returns:
        Mutual information in bits (never negative)
    """
    s = np.asarray(s)
    a = np.asarray(a)
    if s.size == 0:
        raise ValueError("mutual information needs a non-empty window")
    if s.shape != a.shape:
        raise ValueError(f"state and action arrays differ in shape: {s.shape} vs {a.shape}")

    _, s_idx = np.unique(s, return_inverse=True)
    _, a_idx = np.unique(a, return_inverse=True)
    n_s = int(s_idx.max()) + 1
    n_a = int(a_idx.max()) + 1
    n = s.size

    joint = np.bincount(s_idx * n_a + a_idx, minlength=n_s * n_a).reshape(n_s, n_a).astype(np.float64)
    p_sa = joint / n
    p_s = p_sa.sum(axis=1, keepdims=True)
    p_a = p_sa.sum(axis=0, keepdims=True)
    nz = p_sa > 0
    mi = float(np.sum(p_sa[nz] * np.log2(p_sa[nz] / (p_s @ p_a)[nz])))

    if bias_correction:
        m_sa = int(np.count_nonzero(joint))
        mi += (n_s + n_a - m_sa - 1) / (2.0 * n * np.log(2.0))
    return max(mi, 0.0)


def mutual_information(window: PairWindow, bias_correction: bool = False) -> float:
    """
    Plug-in estimate of I(a; s) over a window of (s_id, a_id) pairs.

    Args:
        window: Non-empty sequence of (state id, action id)
        bias_correction: Add the Miller-Madow correction

    Returns:
        Mutual information in bits
    """
    s, a = _as_pairs(window)
    return mutual_information_arrays(s, a, bias_correction)


def windowed_mi(s: np.ndarray, a: np.ndarray, window_n: int, bias_correction: bool = False) -> List[float]:
    """MI of each complete non-overlapping window; a trailing partial window is dropped."""
    if window_n < 1:
        raise ValueError("window_n must be at least 1")
    count = len(s) // window_n
    return [
        mutual_information_arrays(s[k * window_n: (k + 1) * window_n], a[k * window_n: (k + 1) * window_n], bias_correction)
        for k in range(count)
    ]


def mi_series(
    trace: ActionTrace,
    cfg: MIWindowConfig,
    per_branch: bool = False,
    i_max: Optional[float] = None,
) -> MISeries:
    """
    Windowed MI over a trace.

    Windows are consecutive blocks of ``cfg.window_n`` entries. With
    ``per_branch`` each window yields one value per branch present in it,
    computed over that branch's entries only.

    Args:
        trace: Served decisions in step order
        cfg: Window length, state binning and bias correction
        per_branch: Split each window by branch
        i_max: Running maximum carried over from earlier history

    Returns:
        MISeries with the running I_max
    """
    if len(trace) < cfg.window_n:
        raise ValueError(f"trace of {len(trace)} entries is shorter than one window ({cfg.window_n})")

    s, a = trace.pairs(coarse=cfg.binning == StateBinning.COARSE)
    branches = np.array([e.branch for e in trace.entries], dtype=np.int64)
    starts = [e.t for e in trace.entries]
    running = i_max or 0.0
    points: List[MIPoint] = []

    for k in range(len(trace) // cfg.window_n):
        lo, hi = k * cfg.window_n, (k + 1) * cfg.window_n
        groups: Iterable[Tuple[int, np.ndarray]]
        if per_branch:
            groups = [(int(b), branches[lo:hi] == b) for b in np.unique(branches[lo:hi])]
        else:
            groups = [(-1, np.ones(hi - lo, dtype=bool))]
        for branch, sel in groups:
            value = mutual_information_arrays(s[lo:hi][sel], a[lo:hi][sel], cfg.bias_correction)
            running = max(running, value)
            points.append(MIPoint(branch=branch, window_start=starts[lo], i_bits=value, i_max_so_far=running))

    return MISeries(points=points, i_max=running)
