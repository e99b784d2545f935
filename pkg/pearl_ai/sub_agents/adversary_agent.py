"""
Adversary Agent - Clustering inference attack
Plays the honest-but-curious cloud: clusters the shared action stream with
K-means, picks K with the elbow method and scores how well the clusters
recover the hidden behaviour.
"""

from itertools import permutations
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.optimize import linear_sum_assignment

from ..config import settings
from ..schemas.budgets import ClusterFeatures
from ..schemas.records import ClusteringReport
from ..utils.validators import validate_columns, validate_same_length

# exhaustive label matching up to this many classes
MAX_PERMUTATION_CLASSES = 8
ELBOW_CONFIDENCE_RATIO = 3.0


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding."""
    n = len(points)
    centroids = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = _sq_distances(points, np.array(centroids)).min(axis=1)
        total = d2.sum()
        if total <= 0:
            centroids.append(points[rng.integers(n)])
        else:
            centroids.append(points[rng.choice(n, p=d2 / total)])
    return np.array(centroids, dtype=np.float64)


def lloyd(
    points: np.ndarray,
    centroids: np.ndarray,
    max_iter: int = 300,
) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """
    Lloyd iterations until the assignment stops changing.

    An empty cluster is re-seeded at the point farthest from its centroid.

    Returns:
        (centroids, assignments, wcss after each iteration)
    """
    centroids = centroids.copy()
    assignments = np.full(len(points), -1, dtype=np.int64)
    history: List[float] = []
    for _ in range(max_iter):
        d2 = _sq_distances(points, centroids)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(points)), new].sum()))
        if np.array_equal(new, assignments):
            break
        assignments = new
        for j in range(len(centroids)):
            members = points[assignments == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
            else:
                far = int(d2[np.arange(len(points)), assignments].argmax())
                centroids[j] = points[far]
                assignments[far] = j
    d2 = _sq_distances(points, centroids)
    final = float(d2[np.arange(len(points)), assignments].sum())
    history.append(final)
    return centroids, assignments, history


def kmeans(
    points: Sequence[Sequence[float]],
    k: int,
    seed: int = 0,
    restarts: Optional[int] = None,
    max_iter: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    K-means with k-means++ seeding, best of several restarts.

    Args:
        points: Samples (N x D)
        k: Cluster count, 1 <= k <= N
        seed: Seed of the restart streams
        restarts: Restart count (default from settings)
        max_iter: Lloyd iteration cap (default from settings)

    Returns:
        (centroids, assignments, wcss)
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if not 1 <= k <= len(x):
        raise ValueError(f"k must be in [1, {len(x)}], got {k}")
    restarts = restarts or settings.kmeans_restarts
    max_iter = max_iter or settings.kmeans_max_iter

    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        centroids, assignments, history = lloyd(x, kmeans_plus_plus(x, k, rng), max_iter)
        if best is None or history[-1] < best[2]:
            best = (centroids, assignments, history[-1])
    return best


def wcss_curve(points: np.ndarray, k_max: int, seed: int = 0) -> List[Tuple[int, float]]:
    """WCSS for k = 1..k_max, forced non-increasing."""
    k_max = min(k_max, len(points))
    raw = np.array([kmeans(points, k, seed=seed)[2] for k in range(1, k_max + 1)])
    repaired = np.minimum.accumulate(raw)
    if np.any(repaired < raw):
        logger.warning("Non-monotone WCSS from local optima; carried the running minimum forward")
    return [(k, float(w)) for k, w in zip(range(1, k_max + 1), repaired)]


def _check_curve(curve: Sequence[Tuple[int, float]]) -> np.ndarray:
    w = np.array([value for _, value in curve], dtype=np.float64)
    if w.size == 0:
        raise ValueError("empty WCSS curve")
    if np.any(np.diff(w) > 1e-9 * max(1.0, abs(w[0]))):
        raise ValueError("WCSS curve must be non-increasing in k")
    return w


def elbow_select(curve: Sequence[Tuple[int, float]]) -> int:
    """
    Elbow of a WCSS curve: the interior k with the largest second difference.

    Ties go to the smaller k; a flat curve returns 1.
    """
    w = _check_curve(curve)
    ks = [k for k, _ in curve]
    if np.allclose(w, w[0]):
        return ks[0]
    if w.size < 3:
        return ks[-1]
    second = w[:-2] - 2 * w[1:-1] + w[2:]
    return ks[1 + int(np.argmax(second))]


def elbow_confidence(curve: Sequence[Tuple[int, float]], k: int) -> bool:
    """A kink is distinct when the drop into k is several times the drop out of it."""
    w = _check_curve(curve)
    ks = [kk for kk, _ in curve]
    i = ks.index(k)
    if i == 0 or i == len(w) - 1:
        return False
    before, after = w[i - 1] - w[i], w[i] - w[i + 1]
    if after <= 0:
        return before > 0
    return before / after >= ELBOW_CONFIDENCE_RATIO


def attack_accuracy(assignments: Sequence[int], truth: Sequence) -> float:
    """
    Accuracy under the best one-to-one mapping of clusters to behaviour labels.

    The confusion matrix is padded to square so unequal counts are allowed.
    """
    validate_same_length(assignments, truth, "assignments and ground truth")
    if len(assignments) == 0:
        raise ValueError("no samples to score")
    _, c_idx = np.unique(np.asarray(assignments), return_inverse=True)
    _, t_idx = np.unique(np.asarray(truth), return_inverse=True)
    size = max(c_idx.max(), t_idx.max()) + 1
    confusion = np.zeros((size, size), dtype=np.int64)
    np.add.at(confusion, (c_idx, t_idx), 1)

    if size <= MAX_PERMUTATION_CLASSES:
        perms = np.array(list(permutations(range(size))))
        matched = confusion[np.arange(size), perms].sum(axis=1).max()
    else:
        rows, cols = linear_sum_assignment(confusion, maximize=True)
        matched = confusion[rows, cols].sum()
    return float(matched) / len(assignments)


def hourly_features(phase: np.ndarray, actions: np.ndarray, period: int) -> np.ndarray:
    """
    (sin, cos) of the phase on the unit circle plus the standardized action.

    The circle keeps the last step of a day next to the first.
    """
    angle = 2.0 * np.pi * np.asarray(phase, dtype=np.float64) / period
    a = np.asarray(actions, dtype=np.float64)
    std = a.std()
    a = (a - a.mean()) / (std if std > 0 else 1.0)
    return np.column_stack([np.sin(angle), np.cos(angle), a])


def daily_features(actions: np.ndarray, truth: np.ndarray, steps_per_day: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    One row of actions per complete day; the label is the day's most common behaviour.
    """
    days = len(actions) // steps_per_day
    if days == 0:
        raise ValueError(f"trace shorter than one day ({steps_per_day} steps)")
    n = days * steps_per_day
    rows = actions[:n].reshape(days, steps_per_day).astype(np.float64)
    labels = []
    for day in truth[:n].reshape(days, steps_per_day):
        values, counts = np.unique(day, return_counts=True)
        labels.append(values[np.argmax(counts)])
    return rows, np.array(labels)


class AdversaryAgent:
    """
    Clustering attack on shared action streams.
    """

    def __init__(self, k_max: Optional[int] = None, seed: int = 0):
        """
        Initialize the adversary.

        Args:
            k_max: Largest k on the WCSS curve (default from settings)
            seed: Seed of the k-means restarts
        """
        self.k_max = k_max or settings.elbow_k_max
        self.seed = seed

    def attack(
        self,
        trace: pd.DataFrame,
        steps_per_day: int,
        truth: Optional[pd.DataFrame] = None,
        features: ClusterFeatures = ClusterFeatures.HOURLY,
        k: Optional[int] = None,
    ) -> ClusteringReport:
        """
        Cluster a trace and optionally score it against ground truth.

        Args:
            trace: Trace frame with at least ``t`` and ``a_id``
            steps_per_day: Steps per simulated day (phase is ``t`` modulo this)
            truth: Optional frame with ``t`` and ``truth`` columns
            features: Hourly (phase, action) samples or one vector per day
            k: Fixed cluster count instead of the elbow choice

        Returns:
            Clustering report
        """
        validate_columns(trace, ["t", "a_id"], "trace")
        trace = trace.sort_values("t")
        actions = trace["a_id"].to_numpy()
        phase = trace["t"].to_numpy() % steps_per_day

        labels = None
        if truth is not None:
            validate_columns(truth, ["t", "truth"], "ground truth")
            merged = trace[["t"]].merge(truth[["t", "truth"]], on="t", how="left")
            if merged["truth"].isna().any():
                raise ValueError("ground truth does not cover every trace step")
            labels = merged["truth"].to_numpy()

        if features == ClusterFeatures.DAILY:
            day_truth = labels if labels is not None else np.zeros(len(actions), dtype=np.int64)
            x, day_labels = daily_features(actions, day_truth, steps_per_day)
            labels = day_labels if labels is not None else None
        else:
            x = hourly_features(phase, actions, steps_per_day)

        curve = wcss_curve(x, self.k_max, seed=self.seed)
        k_elbow = elbow_select(curve)
        confident = elbow_confidence(curve, k_elbow)
        if not confident:
            logger.warning(f"Elbow at k={k_elbow} is not distinct; treat the cluster count as low-confidence")
        k_used = k or k_elbow
        _, assignments, _ = kmeans(x, k_used, seed=self.seed)

        accuracy = attack_accuracy(assignments, labels) if labels is not None else None
        logger.info(
            f"Attack on {len(x)} {features.value} samples: k={k_used} (elbow {k_elbow}), "
            f"accuracy={'n/a' if accuracy is None else f'{accuracy:.3f}'}"
        )
        return ClusteringReport(
            k_selected=k_used,
            wcss_curve=curve,
            assignments=assignments.tolist(),
            accuracy=accuracy,
            elbow_confident=confident,
            features=features.value,
        )
