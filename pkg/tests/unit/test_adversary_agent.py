"""
Unit tests for the Adversary Agent.
"""

import numpy as np
import pandas as pd
import pytest

from pearl_ai.schemas.budgets import ClusterFeatures
from pearl_ai.sub_agents.adversary_agent import (
    AdversaryAgent,
    attack_accuracy,
    daily_features,
    elbow_confidence,
    elbow_select,
    hourly_features,
    kmeans,
    kmeans_plus_plus,
    lloyd,
    wcss_curve,
)
from pearl_ai.utils.validators import SchemaError


@pytest.fixture
def blobs():
    """Three tight, well-separated 2-D clusters with their labels."""
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    labels = np.repeat(np.arange(3), 30)
    points = centers[labels] + rng.normal(scale=0.3, size=(90, 2))
    return points, labels


@pytest.fixture
def leaky_trace():
    """Trace whose action reveals a binary behaviour, with matching ground truth."""
    rng = np.random.default_rng(1)
    truth = rng.integers(0, 2, size=24 * 10)
    t = np.arange(len(truth))
    trace = pd.DataFrame({"t": t, "a_id": 3 * truth})
    return trace, pd.DataFrame({"t": t, "truth": truth})


class TestKMeans:
    """Clustering core."""

    def test_single_cluster_is_mean(self, blobs):
        """k = 1 puts the centroid at the mean."""
        points, _ = blobs
        centroids, assignments, wcss = kmeans(points, 1, seed=0)
        np.testing.assert_allclose(centroids[0], points.mean(axis=0))
        assert set(assignments.tolist()) == {0}
        assert wcss == pytest.approx(((points - points.mean(axis=0)) ** 2).sum())

    def test_recovers_blobs(self, blobs):
        """Separated blobs are clustered perfectly."""
        points, labels = blobs
        _, assignments, _ = kmeans(points, 3, seed=0)
        assert attack_accuracy(assignments, labels) == 1.0

    def test_one_dimensional_input(self):
        """A flat list is treated as one feature."""
        _, assignments, _ = kmeans([0.0, 0.1, 5.0, 5.1], 2, seed=0)
        assert assignments[0] == assignments[1] != assignments[2] == assignments[3]

    def test_k_out_of_range(self):
        """k must lie between 1 and the sample count."""
        with pytest.raises(ValueError):
            kmeans([[0.0], [1.0]], 3)
        with pytest.raises(ValueError):
            kmeans([[0.0], [1.0]], 0)

    def test_restarts_keep_best_run(self):
        """The result is never worse than any single seeded restart."""
        rng = np.random.default_rng(4)
        points = rng.normal(size=(120, 3))
        for seed in range(5):
            _, _, best = kmeans(points, 5, seed=seed, restarts=10, max_iter=100)
            singles = []
            for child in np.random.SeedSequence(seed).spawn(10):
                child_rng = np.random.default_rng(child)
                _, _, history = lloyd(points, kmeans_plus_plus(points, 5, child_rng), 100)
                singles.append(history[-1])
            assert best == pytest.approx(min(singles))
            assert best <= kmeans(points, 5, seed=seed, restarts=1, max_iter=100)[2] + 1e-9

    def test_wcss_curve_non_increasing(self, blobs):
        """WCSS never grows with k."""
        points, _ = blobs
        values = [w for _, w in wcss_curve(points, 6, seed=0)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_wcss_curve_capped_by_samples(self):
        """k_max cannot exceed the sample count."""
        assert len(wcss_curve(np.arange(3.0).reshape(-1, 1), 10)) == 3


class TestElbow:
    """Elbow selection."""

    def test_kink_at_four(self):
        """The largest second difference marks the elbow."""
        curve = list(zip(range(1, 7), [100.0, 70.0, 45.0, 20.0, 18.0, 16.0]))
        assert elbow_select(curve) == 4
        assert elbow_confidence(curve, 4)

    def test_flat_curve(self):
        """A flat curve selects one cluster."""
        assert elbow_select([(1, 5.0), (2, 5.0), (3, 5.0)]) == 1

    def test_linear_curve_not_confident(self):
        """Evenly spaced drops give no distinct kink."""
        curve = list(zip(range(1, 6), [50.0, 40.0, 30.0, 20.0, 10.0]))
        assert not elbow_confidence(curve, elbow_select(curve))

    def test_blobs_elbow(self, blobs):
        """The blob curve bends at three."""
        points, _ = blobs
        assert elbow_select(wcss_curve(points, 8, seed=0)) == 3

    def test_increasing_curve_rejected(self):
        """Curves must be non-increasing."""
        with pytest.raises(ValueError):
            elbow_select([(1, 1.0), (2, 2.0), (3, 0.5)])

    def test_empty_curve_rejected(self):
        """An empty curve has no elbow."""
        with pytest.raises(ValueError):
            elbow_select([])


class TestAttackAccuracy:
    """Label-matched accuracy."""

    def test_permutation_invariance(self):
        """Cluster ids are matched to labels before scoring."""
        assert attack_accuracy([1, 1, 0, 0, 2], [0, 0, 1, 1, 2]) == 1.0

    def test_chance_level(self):
        """A single cluster scores the majority share."""
        assert attack_accuracy([0] * 8, [0, 1, 2, 3] * 2) == 0.25

    def test_unequal_counts(self):
        """More clusters than labels is allowed."""
        assert attack_accuracy([0, 1, 2, 3], [0, 0, 1, 1]) == 0.5

    def test_many_classes(self):
        """Beyond the exhaustive limit the assignment solver is used."""
        truth = np.arange(12).repeat(3)
        relabeled = (truth * 5 + 1) % 12
        assert attack_accuracy(relabeled, truth) == 1.0

    def test_length_mismatch(self):
        """Assignments and labels must align."""
        with pytest.raises(ValueError):
            attack_accuracy([0, 1], [0])


class TestFeatures:
    """Feature construction."""

    def test_hourly_circular_phase(self):
        """Phase lies on the unit circle; the action column is standardized."""
        x = hourly_features(np.arange(24), np.arange(24) % 3, 24)
        assert x.shape == (24, 3)
        assert np.allclose(x[:, 0] ** 2 + x[:, 1] ** 2, 1.0)
        assert x[:, 2].mean() == pytest.approx(0.0, abs=1e-12)
        assert x[:, 2].std() == pytest.approx(1.0)

    def test_hourly_midnight_adjacent(self):
        """The last hour of a day is as close to midnight as to the hour before it."""
        x = hourly_features(np.arange(24), np.zeros(24), 24)
        assert np.all(x[:, 2] == 0.0)
        assert np.linalg.norm(x[23] - x[0]) == pytest.approx(np.linalg.norm(x[23] - x[22]))

    def test_daily_rows_and_mode(self):
        """One row per complete day labelled by its most common behaviour."""
        actions = np.arange(50)
        truth = np.array([1] * 20 + [0] * 4 + [2] * 24 + [0, 0])
        rows, labels = daily_features(actions, truth, 24)
        assert rows.shape == (2, 24)
        assert labels.tolist() == [1, 2]

    def test_daily_needs_a_day(self):
        """Shorter than one day is an error."""
        with pytest.raises(ValueError):
            daily_features(np.arange(5), np.zeros(5), 24)


class TestAdversaryAgent:
    """End-to-end attack on a trace frame."""

    def test_leaky_trace_fully_recovered(self, leaky_trace):
        """An action that mirrors behaviour is clustered perfectly."""
        trace, truth = leaky_trace
        report = AdversaryAgent(k_max=6, seed=0).attack(trace, 24, truth, k=2)
        assert report.k_selected == 2
        assert report.accuracy == 1.0
        assert len(report.assignments) == len(trace)
        assert len(report.wcss_curve) == 6

    def test_without_truth(self, leaky_trace):
        """No ground truth means no accuracy."""
        trace, _ = leaky_trace
        report = AdversaryAgent(k_max=4, seed=0).attack(trace, 24)
        assert report.accuracy is None

    def test_daily_features(self, leaky_trace):
        """Daily mode clusters one vector per day."""
        trace, truth = leaky_trace
        report = AdversaryAgent(k_max=4, seed=0).attack(trace, 24, truth, features=ClusterFeatures.DAILY)
        assert len(report.assignments) == 10
        assert report.features == "daily"

    def test_missing_columns(self):
        """Trace frames need t and a_id."""
        with pytest.raises(SchemaError):
            AdversaryAgent(k_max=3).attack(pd.DataFrame({"t": [0, 1]}), 24)

    def test_truth_must_cover_trace(self, leaky_trace):
        """Every step needs a label."""
        trace, truth = leaky_trace
        with pytest.raises(ValueError):
            AdversaryAgent(k_max=3).attack(trace, 24, truth.iloc[:-1])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
