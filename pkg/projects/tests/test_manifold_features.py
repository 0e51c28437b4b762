"""
Tests for geodesic grouping, geodesic-relational attention and the
manifold positional embedding
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manifold_geodesics.errors import IndexOutOfRangeError, ValidationError
from manifold_geodesics.geodesic import build_engine
from manifold_geodesics.manifold_features import (
    RelationMlpParams,
    euclidean_knn,
    geodesic_knn,
    gng_build,
    gra_t_forward,
    mpe_augment,
    sheet_purity,
)
from manifold_geodesics.sampling_graph import build_knn_graph


@pytest.fixture
def roll_engine(swiss_roll):
    return build_engine(swiss_roll, build_knn_graph(swiss_roll, 8), 32, "euclidean", s=4)


def hand_params():
    """Small fixed MLP mapping width 2 -> 2 hidden -> 1."""
    return RelationMlpParams(
        w1=[[0.5, -1.0], [2.0, 0.25]],
        b1=[0.1, -0.2],
        w2=[[1.5], [-0.7]],
        b2=[0.3],
    )


@pytest.mark.unit
class TestRelationMlpParams:
    """Test the injected MLP parameters."""

    def test_widths(self):
        """Test declared widths."""
        params = hand_params()
        assert (params.in_width, params.hidden_width, params.out_width) == (2, 2, 1)

    def test_dict_form(self):
        """Test the {w1, b1, w2, b2} JSON layout."""
        params = hand_params()
        again = RelationMlpParams.from_dict(params.to_dict())
        np.testing.assert_array_equal(again.w1, params.w1)
        assert set(params.to_dict()) == {"w1", "b1", "w2", "b2"}

    def test_inconsistent_widths(self):
        """Test width mismatches are rejected."""
        with pytest.raises(ValidationError):
            RelationMlpParams(w1=np.zeros((2, 3)), b1=np.zeros(2), w2=np.zeros((3, 1)), b2=np.zeros(1))
        with pytest.raises(ValidationError):
            RelationMlpParams.from_dict({"w1": [[1.0]], "b1": [0.0]})

    def test_non_finite_rejected(self):
        """Test NaN parameters are rejected."""
        with pytest.raises(ValidationError):
            RelationMlpParams(w1=[[np.nan]], b1=[0.0], w2=[[1.0]], b2=[0.0])

    def test_random_is_seeded(self):
        """Test seeded initialization with the default hidden width."""
        a = RelationMlpParams.random(5, 4, seed=3)
        b = RelationMlpParams.random(5, 4, seed=3)
        np.testing.assert_array_equal(a.w2, b.w2)
        assert a.hidden_width == 8


@pytest.mark.unit
class TestNeighborSelection:
    """Test geodesic and Euclidean k-NN."""

    def test_chain_example(self, chain_cloud):
        """Test a path graph: center 0, k=2 -> [1, 2] at [1, 2]."""
        engine = build_engine(chain_cloud, build_knn_graph(chain_cloud, 1), 4, "graph")
        indices, dists = geodesic_knn(engine, 0, 2)
        assert indices.tolist() == [1, 2]
        assert dists.tolist() == [1.0, 2.0]

    def test_exhaustive_selection(self, roll_engine):
        """Test k = N - 1 returns every other point in ascending order."""
        n = roll_engine.n
        indices, dists = geodesic_knn(roll_engine, 10, n - 1)
        assert sorted(indices.tolist()) == [i for i in range(n) if i != 10]
        assert np.all(np.diff(dists) >= 0)

    def test_matches_full_ranking(self, roll_engine):
        """Test against sorting all scalar distances with index tie-break."""
        center = 77
        d = np.array([roll_engine.approx(center, j) for j in range(roll_engine.n)])
        order = [j for j in np.lexsort((np.arange(roll_engine.n), d)) if j != center][:12]
        indices, _ = geodesic_knn(roll_engine, center, 12)
        assert indices.tolist() == order

    def test_candidate_pool(self, roll_engine):
        """Test that a pool restricts the choice and drops the center."""
        pool = list(range(0, 60))
        indices, _ = geodesic_knn(roll_engine, 5, 10, candidate_pool=pool)
        assert set(indices.tolist()) <= set(pool) - {5}

    def test_infinite_candidates_last(self, two_planes):
        """Test unreachable points follow reachable ones, ordered by straight distance."""
        cloud, meta = two_planes
        engine = build_engine(cloud, build_knn_graph(cloud, 7), 16, "graph", s=4)
        indices, dists = geodesic_knn(engine, 0, 450)
        tags = meta.ground_truth_part_id
        assert np.all(np.isfinite(dists[:399]))
        assert np.all(np.isinf(dists[399:]))
        assert np.all(tags[indices[:399]] == 0)
        tail = indices[399:]
        straight = np.linalg.norm(cloud.positions[tail] - cloud.positions[0], axis=1)
        assert np.all(np.diff(straight) >= -1e-12)
        # directly above the center comes first among the other sheet
        assert tail[0] == 400

    def test_k_too_large(self, chain_cloud):
        """Test infeasible k."""
        engine = build_engine(chain_cloud, build_knn_graph(chain_cloud, 1), 4, "graph")
        with pytest.raises(ValidationError):
            geodesic_knn(engine, 0, 4)
        with pytest.raises(ValidationError):
            geodesic_knn(engine, 0, 2, candidate_pool=[0, 1])
        with pytest.raises(IndexOutOfRangeError):
            geodesic_knn(engine, 7, 1)

    def test_euclidean_knn(self, chain_cloud):
        """Test the straight-line counterpart with index tie-break."""
        indices, dists = euclidean_knn(chain_cloud, 1, 2)
        assert indices.tolist() == [0, 2]
        assert dists.tolist() == [1.0, 1.0]

    def test_sheet_purity_contrast(self, two_planes):
        """Test geodesic grouping stays on the sheet while Euclidean grouping crosses."""
        cloud, meta = two_planes
        tags = meta.ground_truth_part_id
        engine = build_engine(cloud, build_knn_graph(cloud, 7), 64, "graph", s=8)
        centers = list(range(0, 800, 37)) + [0, 19, 380, 399, 400, 799]
        geo = np.vstack([geodesic_knn(engine, c, 16)[0] for c in centers])
        euc = np.vstack([euclidean_knn(cloud, c, 16)[0] for c in centers])
        assert sheet_purity(geo, centers, tags) == 1.0
        assert sheet_purity(euc, centers, tags) < 1.0

    def test_sheet_purity_value(self):
        """Test the fraction computation."""
        tags = np.array([0, 0, 1, 1])
        assert sheet_purity(np.array([[1, 2], [3, 2]]), [0, 3], tags) == 0.75


@pytest.mark.unit
class TestGroupingHierarchy:
    """Test the geodesic neighborhood grouper."""

    def test_no_downsampling(self, grid_cloud):
        """Test level_sizes=[N] with k=1 covers every point once."""
        engine = build_engine(grid_cloud, build_knn_graph(grid_cloud, 4), 8)
        (level,) = gng_build(grid_cloud, engine, [grid_cloud.n], 1)
        assert sorted(level.center_indices.tolist()) == list(range(grid_cloud.n))
        assert level.neighbor_indices.shape == (grid_cloud.n, 1)

    def test_nested_levels(self, swiss_roll, roll_engine):
        """Test each level's centers are a subset of the previous level's."""
        levels = gng_build(swiss_roll, roll_engine, [64, 16, 4], 6)
        assert [lvl.center_indices.size for lvl in levels] == [64, 16, 4]
        for upper, lower in zip(levels, levels[1:]):
            assert set(lower.center_indices.tolist()) <= set(upper.center_indices.tolist())
        for level in levels:
            level.check()

    def test_descriptors_finite_and_nonzero(self, grid_cloud):
        """Test descriptor rows on a grid."""
        engine = build_engine(grid_cloud, build_knn_graph(grid_cloud, 4), 8)
        (level,) = gng_build(grid_cloud, engine, [16], 4)
        assert level.descriptors.shape == (16, 16)
        assert np.all(np.isfinite(level.descriptors))
        assert np.all(np.abs(level.descriptors).sum(axis=1) > 0)

    def test_descriptor_rule(self, grid_cloud):
        """Test one descriptor against the channelwise max it is defined as."""
        engine = build_engine(grid_cloud, build_knn_graph(grid_cloud, 4), 8)
        params = RelationMlpParams.random(3 + 3 + 1, 5, seed=9)
        (level,) = gng_build(grid_cloud, engine, [8], 3, params=params)
        c = level.center_indices[2]
        rows = []
        for j, d in zip(level.neighbor_indices[2], level.neighbor_geodesics[2]):
            x = np.concatenate([grid_cloud.positions[j], grid_cloud.positions[j] - grid_cloud.positions[c], [d]])
            rows.append(params.forward(x))
        np.testing.assert_allclose(level.descriptors[2], np.max(rows, axis=0), rtol=0, atol=1e-12)

    def test_parent_pool(self, swiss_roll, roll_engine):
        """Test neighbors drawn from the parent level only."""
        levels = gng_build(swiss_roll, roll_engine, [64, 16], 5, pool="parent")
        parent = set(levels[0].center_indices.tolist())
        assert set(levels[1].neighbor_indices.ravel().tolist()) <= parent

    def test_euclidean_grouping_switch(self, swiss_roll, roll_engine):
        """Test the Euclidean grouping ablation."""
        (level,) = gng_build(swiss_roll, roll_engine, [10], 4, metric="euclidean")
        expected = euclidean_knn(swiss_roll, int(level.center_indices[0]), 4)[0]
        assert level.neighbor_indices[0].tolist() == expected.tolist()

    def test_invalid_levels(self, swiss_roll, roll_engine):
        """Test level and k validation."""
        with pytest.raises(ValidationError):
            gng_build(swiss_roll, roll_engine, [16, 16], 4)
        with pytest.raises(ValidationError):
            gng_build(swiss_roll, roll_engine, [301], 4)
        with pytest.raises(ValidationError):
            gng_build(swiss_roll, roll_engine, [16], 300)
        with pytest.raises(ValidationError):
            gng_build(swiss_roll, roll_engine, [], 4)


@pytest.mark.unit
class TestAttention:
    """Test the geodesic-relational attention forward pass."""

    def test_singleton_neighbor_identity(self, rng):
        """Test k=1 gives weight 1 and copies the neighbor exactly."""
        features = rng.normal(size=(6, 3))
        params = RelationMlpParams.random(4, 3, seed=1)
        out = gra_t_forward(features, [[2], [5]], [[0.5], [1.5]], params)
        np.testing.assert_array_equal(out.weights, np.ones((2, 1, 3)))
        np.testing.assert_array_equal(out.refined, features[[2, 5]])

    def test_uniform_logits_mean_pool(self, rng):
        """Test zero first-layer weights give the channelwise mean."""
        features = rng.normal(size=(10, 4))
        params = RelationMlpParams(
            w1=np.zeros((5, 8)), b1=rng.normal(size=8), w2=rng.normal(size=(8, 4)), b2=rng.normal(size=4)
        )
        neighbors = np.array([[1, 2, 3, 4], [5, 6, 7, 8]])
        out = gra_t_forward(features, neighbors, rng.uniform(size=(2, 4)), params)
        np.testing.assert_allclose(out.weights, 0.25, atol=1e-12)
        expected = features[neighbors].mean(axis=1)
        assert np.max(np.abs(out.refined - expected)) < 1e-9

    def test_hand_evaluation(self):
        """Test C=1, k=2 against a scalar evaluation of the three equations."""
        params = hand_params()
        f_i, neighbors, dists = 0.0, [1.0, 3.0], [1.0, 2.0]

        def mlp(a, b):
            h0 = max(0.0, 0.5 * a + 2.0 * b + 0.1)
            h1 = max(0.0, -1.0 * a + 0.25 * b - 0.2)
            return 1.5 * h0 - 0.7 * h1 + 0.3

        logits = [mlp(f_i - f, d) for f, d in zip(neighbors, dists)]
        exps = [math.exp(r) for r in logits]
        alpha = [e / sum(exps) for e in exps]
        refined = sum(a * f for a, f in zip(alpha, neighbors))

        features = np.array([[f_i], [1.0], [3.0]])
        out = gra_t_forward(features, [[1, 2]], [dists], params)
        np.testing.assert_allclose(out.weights[0, :, 0], alpha, rtol=0, atol=1e-9)
        assert abs(out.refined[0, 0] - refined) < 1e-9

    def test_center_indices(self, rng):
        """Test attending rows chosen by center_indices."""
        features = rng.normal(size=(8, 2))
        params = RelationMlpParams.random(3, 2, seed=4)
        a = gra_t_forward(features, [[1, 2]], [[0.1, 0.2]], params, center_indices=[7])
        b = gra_t_forward(features[[7, 1, 2]], [[1, 2]], [[0.1, 0.2]], params)
        np.testing.assert_array_equal(a.refined, b.refined)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=6), st.integers(min_value=1, max_value=5))
    def test_weight_and_convexity_properties(self, seed, k, c):
        """Test weight normalization, convexity, shift and order invariance."""
        gen = np.random.default_rng(seed)
        features = gen.normal(scale=3.0, size=(12, c))
        neighbors = np.array([gen.choice(np.arange(1, 12), size=k, replace=False) for _ in range(3)])
        dists = gen.uniform(0.0, 2.0, size=neighbors.shape)
        params = RelationMlpParams.random(c + 1, c, seed=seed)

        out = gra_t_forward(features, neighbors, dists, params)
        assert np.all(out.weights >= 0)
        np.testing.assert_allclose(out.weights.sum(axis=1), 1.0, atol=1e-6)
        grouped = features[neighbors]
        assert np.all(out.refined >= grouped.min(axis=1) - 1e-12)
        assert np.all(out.refined <= grouped.max(axis=1) + 1e-12)

        shifted = RelationMlpParams(params.w1, params.b1, params.w2, params.b2 + 17.0)
        moved = gra_t_forward(features, neighbors, dists, shifted)
        np.testing.assert_allclose(moved.weights, out.weights, atol=1e-9)
        np.testing.assert_allclose(moved.refined, out.refined, atol=1e-9)

        perm = gen.permutation(k)
        permuted = gra_t_forward(features, neighbors[:, perm], dists[:, perm], params)
        np.testing.assert_allclose(permuted.refined, out.refined, rtol=0, atol=1e-12)

    def test_input_validation(self, rng):
        """Test width mismatch, empty neighbor lists and NaN inputs."""
        features = rng.normal(size=(5, 2))
        params = RelationMlpParams.random(3, 2)
        with pytest.raises(ValidationError):
            gra_t_forward(features, [[1]], [[0.5]], RelationMlpParams.random(4, 3))
        with pytest.raises(ValidationError):
            gra_t_forward(features, np.zeros((1, 0), dtype=int), np.zeros((1, 0)), params)
        with pytest.raises(ValidationError):
            gra_t_forward(features, [[1]], [[np.nan]], params)
        with pytest.raises(IndexOutOfRangeError):
            gra_t_forward(features, [[9]], [[0.5]], params)


@pytest.mark.unit
class TestPositionalEmbedding:
    """Test the manifold positional embedding."""

    def test_width_arithmetic(self, roll_engine, rng):
        """Test output width is C + M, including C = 0."""
        idx = [0, 5, 9]
        assert mpe_augment(rng.normal(size=(3, 4)), roll_engine, idx).shape == (3, 4 + roll_engine.m)
        assert mpe_augment(None, roll_engine, idx).shape == (3, roll_engine.m)
        assert mpe_augment(np.zeros((3, 0)), roll_engine, idx).shape == (3, roll_engine.m)

    def test_leading_block_unchanged(self, roll_engine, rng):
        """Test the input features are copied verbatim."""
        features = rng.normal(size=(2, 3))
        out = mpe_augment(features, roll_engine, [3, 4])
        np.testing.assert_array_equal(out[:, :3], features)

    def test_anchor_row_has_zero(self, roll_engine):
        """Test an anchor's own component is zero."""
        anchors = roll_engine.anchors.anchor_indices
        out = mpe_augment(np.ones((3, 2)), roll_engine, anchors[:3])
        for w in range(3):
            assert out[w, 2 + w] == 0.0

    def test_trailing_block_exhaustive(self, roll_engine):
        """Test every component against a brute-force minimization."""
        legs, amat = roll_engine.point_to_anchor, roll_engine.anchors.anchor_matrix
        idx = list(range(0, 300, 29))
        out = mpe_augment(None, roll_engine, idx)
        for row, i in enumerate(idx):
            for v in range(roll_engine.m):
                expected = min(legs[i, u] + amat[u, v] for u in range(roll_engine.m))
                assert abs(out[row, v] - expected) < 1e-9

    def test_errors(self, roll_engine):
        """Test row-count mismatch and bad indices."""
        with pytest.raises(ValidationError):
            mpe_augment(np.zeros((2, 1)), roll_engine, [0, 1, 2])
        with pytest.raises(IndexOutOfRangeError):
            mpe_augment(None, roll_engine, [1000])
