"""
Tests for Chamfer distance, F-score and the multi-stage loss
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manifold_geodesics.cloud_core import PointCloud
from manifold_geodesics.errors import EmptyCloudError, ValidationError
from manifold_geodesics.metrics import (
    MetricReport,
    chamfer,
    evaluate,
    f_score,
    nearest_sq_distances,
    nearest_sq_distances_bruteforce,
    total_loss,
)


def cloud(*points):
    return PointCloud(np.array(points, dtype=float))


def reference_chamfer(p, q, variant):
    """O(|P| |Q|) evaluation of the documented formulas."""
    d = ((p[:, None, :] - q[None, :, :]) ** 2).sum(axis=-1)
    fwd, bwd = d.min(axis=1), d.min(axis=0)
    if variant == "l2":
        return fwd.mean() + bwd.mean()
    return 0.5 * (np.sqrt(fwd).mean() + np.sqrt(bwd).mean())


def reference_f_score(p, q, threshold):
    d = np.sqrt(((p[:, None, :] - q[None, :, :]) ** 2).sum(axis=-1))
    precision = (d.min(axis=1) < threshold).mean()
    recall = (d.min(axis=0) < threshold).mean()
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


@pytest.mark.unit
class TestChamfer:
    """Test Chamfer distance variants."""

    def test_identity(self, swiss_roll):
        """Test chamfer(P, P) = 0."""
        assert chamfer(swiss_roll, swiss_roll, "l1") == 0.0
        assert chamfer(swiss_roll, swiss_roll, "l2") == 0.0

    def test_single_points(self):
        """Test unit-separated singletons."""
        p, q = cloud([0, 0, 0]), cloud([1, 0, 0])
        assert abs(chamfer(p, q, "l2") - 2.0) < 1e-12
        assert abs(chamfer(p, q, "l1") - 1.0) < 1e-12

    def test_unbalanced_sets(self):
        """Test one point against two."""
        p, q = cloud([0, 0, 0]), cloud([0, 0, 0], [3, 0, 0])
        assert abs(chamfer(p, q, "l2") - 4.5) < 1e-12
        assert abs(chamfer(p, q, "l1") - 0.75) < 1e-12

    def test_symmetry(self, rng):
        """Test swapping P and Q."""
        p, q = PointCloud(rng.normal(size=(30, 3))), PointCloud(rng.normal(size=(45, 3)))
        for variant in ("l1", "l2"):
            assert chamfer(p, q, variant) == pytest.approx(chamfer(q, p, variant), abs=1e-15)

    def test_rigid_motion_invariance(self, rng):
        """Test rotation plus translation of both clouds."""
        p, q = PointCloud(rng.normal(size=(40, 3))), PointCloud(rng.normal(size=(50, 3)))
        a = 1.1
        rot = np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])
        t = np.array([5.0, -2.0, 0.5])
        before = evaluate(p, q, 0.3)
        after = evaluate(p.transformed(rot, t), q.transformed(rot, t), 0.3)
        assert after.cd_l1 == pytest.approx(before.cd_l1, abs=1e-9)
        assert after.cd_l2 == pytest.approx(before.cd_l2, abs=1e-9)
        assert after.f_score == pytest.approx(before.f_score, abs=1e-9)

    def test_finite_difference(self):
        """Test moving one point along its nearest direction changes CD-L1 by delta / (2|P|)."""
        p = np.array([[0.0, 0, 0], [10.0, 0, 0], [0.0, 10.0, 0]])
        q = np.array([[1.0, 0, 0], [11.0, 0, 0], [0.0, 11.0, 0]])
        delta = 1e-4
        moved = p.copy()
        moved[0, 0] += delta  # toward its nearest q, which is also its only reverse match
        base = chamfer(p, q, "l1")
        change = chamfer(moved, q, "l1") - base
        # the point is also q[0]'s nearest, so both directions shrink
        expected = -delta / (2 * len(p)) - delta / (2 * len(q))
        assert change == pytest.approx(expected, rel=0.1)

    def test_bad_inputs(self):
        """Test unknown variant and empty arrays."""
        with pytest.raises(ValidationError):
            chamfer(cloud([0, 0, 0]), cloud([1, 0, 0]), "l3")
        with pytest.raises(EmptyCloudError):
            chamfer(np.zeros((0, 3)), cloud([1, 0, 0]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=100_000), st.integers(min_value=1, max_value=200), st.integers(min_value=1, max_value=200))
    def test_accelerated_search_equals_brute_force(self, seed, n_p, n_q):
        """Test KD-tree nearest distances equal brute force exactly."""
        gen = np.random.default_rng(seed)
        p, q = gen.normal(size=(n_p, 3)), gen.normal(size=(n_q, 3))
        np.testing.assert_array_equal(nearest_sq_distances(p, q), nearest_sq_distances_bruteforce(p, q))
        for variant in ("l1", "l2"):
            assert chamfer(p, q, variant) == reference_chamfer(p, q, variant)


@pytest.mark.unit
class TestFScore:
    """Test the F-score."""

    def test_identical(self, swiss_roll):
        """Test identical clouds score 1."""
        assert f_score(swiss_roll, swiss_roll, 0.01) == 1.0

    def test_far_apart(self):
        """Test clouds beyond the threshold score 0."""
        assert f_score(cloud([0, 0, 0]), cloud([5, 0, 0]), 1.0) == 0.0

    def test_hand_example(self):
        """Test precision 1/2, recall 1 -> 2/3."""
        p, q = cloud([0, 0, 0], [5, 0, 0]), cloud([0, 0, 0])
        assert abs(f_score(p, q, 1.0) - 2.0 / 3.0) < 1e-12

    def test_strict_threshold(self):
        """Test a point exactly at the threshold does not count."""
        assert f_score(cloud([0, 0, 0]), cloud([1, 0, 0]), 1.0) == 0.0

    def test_symmetry_and_monotonicity(self, rng):
        """Test swap symmetry and non-increase as the threshold shrinks."""
        p, q = rng.normal(size=(50, 3)), rng.normal(size=(60, 3))
        assert f_score(p, q, 0.4) == pytest.approx(f_score(q, p, 0.4), abs=1e-15)
        scores = [f_score(p, q, t) for t in (1.0, 0.5, 0.25, 0.1, 0.05)]
        assert all(b <= a for a, b in zip(scores, scores[1:]))

    def test_threshold_validation(self):
        """Test nonpositive thresholds."""
        with pytest.raises(ValidationError):
            f_score(cloud([0, 0, 0]), cloud([0, 0, 0]), 0.0)

    def test_matches_reference(self, rng):
        """Test against the brute-force definition."""
        for _ in range(5):
            p, q = rng.uniform(size=(80, 3)), rng.uniform(size=(70, 3))
            assert f_score(p, q, 0.1) == reference_f_score(p, q, 0.1)


@pytest.mark.unit
class TestLossAndReport:
    """Test the multi-stage loss and the report type."""

    def test_no_stages(self, rng):
        """Test the empty sum reduces to the coarse term."""
        p, q = rng.normal(size=(10, 3)), rng.normal(size=(12, 3))
        assert total_loss(p, [], q) == chamfer(p, q)

    def test_everything_equal(self, swiss_roll):
        """Test a perfect prediction has zero loss."""
        assert total_loss(swiss_roll, [swiss_roll], swiss_roll, "l1") == 0.0

    def test_sum_of_hand_values(self):
        """Test coarse plus one stage with hand-computable values."""
        gt = cloud([0, 0, 0])
        coarse = cloud([1, 0, 0])
        stage = cloud([0, 0, 0], [3, 0, 0])
        assert abs(total_loss(coarse, [stage], gt, "l2") - (2.0 + 4.5)) < 1e-12
        assert abs(total_loss(coarse, [stage], gt, "l1") - (1.0 + 0.75)) < 1e-12

    def test_report_fields(self, rng):
        """Test the JSON form and scaling."""
        p, q = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
        report = evaluate(p, q, 0.5)
        data = report.to_dict()
        assert {"cd_l1", "cd_l2", "f_score", "threshold"} <= set(data)
        assert "scaled" not in data
        scaled = report.with_scale(1e4, 1e3).to_dict()["scaled"]
        assert scaled["cd_l2"] == pytest.approx(report.cd_l2 * 1e4)
        assert scaled["cd_l1"] == pytest.approx(report.cd_l1 * 1e3)

    def test_report_validation(self):
        """Test out-of-range values are rejected."""
        with pytest.raises(ValidationError):
            MetricReport(cd_l1=-1.0, cd_l2=0.0, f_score=0.5, threshold=0.01)
        with pytest.raises(ValidationError):
            MetricReport(cd_l1=0.0, cd_l2=0.0, f_score=1.5, threshold=0.01)
