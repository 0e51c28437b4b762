"""
Manifold-aware feature extraction: geodesic neighborhood grouping, the
geodesic-relational attention forward pass and the manifold positional
embedding. Everything here is inference only; MLP weights are injected.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cloud_core import PointCloud
from .config import config
from .errors import InvariantViolation, ValidationError, check_index
from .geodesic import GeodesicEngine
from .log import get_logger
from .sampling_graph import euclidean_to, fps

logger = get_logger(__name__)

GROUPING_METRICS = ("geodesic", "euclidean")
NEIGHBOR_POOLS = ("cloud", "parent")


# ==================== Shared MLP ====================

@dataclass(frozen=True, eq=False)
class RelationMlpParams:
    """One-hidden-layer perceptron: y = max(0, x @ w1 + b1) @ w2 + b2.

    w1 is (in, H), w2 is (H, out); matrices are row-major as in the JSON form.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("w1", "b1", "w2", "b2"):
            value = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if not np.all(np.isfinite(value)):
                raise ValidationError(f"MLP parameter '{name}' contains NaN or Inf")
            value.setflags(write=False)
            arrays[name] = value
            object.__setattr__(self, name, value)

        w1, b1, w2, b2 = arrays["w1"], arrays["b1"], arrays["w2"], arrays["b2"]
        if w1.ndim != 2 or w2.ndim != 2 or b1.ndim != 1 or b2.ndim != 1:
            raise ValidationError("MLP weights must be matrices and biases vectors")
        if w1.shape[1] != b1.shape[0] or w2.shape[0] != w1.shape[1] or w2.shape[1] != b2.shape[0]:
            raise ValidationError(
                f"inconsistent MLP widths: w1{w1.shape} b1{b1.shape} w2{w2.shape} b2{b2.shape}"
            )

    @property
    def in_width(self) -> int:
        return int(self.w1.shape[0])

    @property
    def hidden_width(self) -> int:
        return int(self.w1.shape[1])

    @property
    def out_width(self) -> int:
        return int(self.w2.shape[1])

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Apply to the last axis of x."""
        hidden = np.maximum(x @ self.w1 + self.b1, 0.0)
        return hidden @ self.w2 + self.b2

    @classmethod
    def random(
        cls,
        in_width: int,
        out_width: int,
        hidden_width: Optional[int] = None,
        seed: int = 0,
    ) -> "RelationMlpParams":
        """Seeded He-normal weights with small biases."""
        if hidden_width is None:
            hidden_width = max(1, config.HIDDEN_RATIO * out_width)
        if min(in_width, out_width, hidden_width) < 1:
            raise ValidationError("MLP widths must be >= 1")
        rng = np.random.default_rng(seed)
        return cls(
            w1=rng.normal(0.0, np.sqrt(2.0 / in_width), size=(in_width, hidden_width)),
            b1=rng.normal(0.0, 0.01, size=hidden_width),
            w2=rng.normal(0.0, np.sqrt(2.0 / hidden_width), size=(hidden_width, out_width)),
            b2=rng.normal(0.0, 0.01, size=out_width),
        )

    def to_dict(self) -> Dict:
        return {name: getattr(self, name).tolist() for name in ("w1", "b1", "w2", "b2")}

    @classmethod
    def from_dict(cls, data: Dict) -> "RelationMlpParams":
        missing = [name for name in ("w1", "b1", "w2", "b2") if name not in data]
        if missing:
            raise ValidationError(f"MLP parameters missing {missing}")
        return cls(**{name: data[name] for name in ("w1", "b1", "w2", "b2")})


# ==================== Neighborhood selection ====================

def _resolve_pool(n: int, center: int, candidate_pool: Optional[Sequence[int]]) -> np.ndarray:
    if candidate_pool is None:
        pool = np.arange(n)
    else:
        pool = np.unique(np.asarray(candidate_pool, dtype=np.intp))
        if pool.size and (pool[0] < 0 or pool[-1] >= n):
            bad = int(pool[0] if pool[0] < 0 else pool[-1])
            check_index("candidate", bad, n)
    return pool[pool != center]


def _check_k(k: int, available: int) -> int:
    if not 1 <= int(k) <= available:
        raise ValidationError(f"k={k} is infeasible for a candidate pool of {available} points")
    return int(k)


def geodesic_knn(
    engine: GeodesicEngine,
    center: int,
    k: int,
    candidate_pool: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """The k pool members closest to center by approximate geodesic.

    Args:
        engine: Geodesic engine
        center: Center vertex; never part of the result
        k: Neighbors to return
        candidate_pool: Allowed vertices (default: the whole cloud)

    Returns:
        (indices, distances) ascending. Ties go to the lower index; candidates
        at infinite distance come last, ordered by Euclidean distance.
    """
    center = check_index("center", center, engine.n)
    pool = _resolve_pool(engine.n, center, candidate_pool)
    k = _check_k(k, pool.size)

    dists = engine.distances_from(center, pool)
    finite = np.isfinite(dists)
    fin_pool, fin_d = pool[finite], dists[finite]
    order = np.lexsort((fin_pool, fin_d))[:k]
    indices, out = fin_pool[order], fin_d[order]

    if indices.size < k:
        inf_pool = pool[~finite]
        straight = engine.euclidean(center, inf_pool)
        rest = np.lexsort((inf_pool, straight))[:k - indices.size]
        indices = np.concatenate([indices, inf_pool[rest]])
        out = np.concatenate([out, np.full(rest.size, np.inf)])
    return indices, out


def euclidean_knn(
    cloud: PointCloud,
    center: int,
    k: int,
    candidate_pool: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Straight-line counterpart of geodesic_knn."""
    center = check_index("center", center, cloud.n)
    pool = _resolve_pool(cloud.n, center, candidate_pool)
    k = _check_k(k, pool.size)
    dists = euclidean_to(cloud.positions[pool], cloud.positions[center])
    order = np.lexsort((pool, dists))[:k]
    return pool[order], dists[order]


def sheet_purity(neighbor_lists: np.ndarray, centers: Sequence[int], part_ids: np.ndarray) -> float:
    """Fraction of selected neighbors carrying their center's part id."""
    neighbor_lists = np.asarray(neighbor_lists, dtype=np.intp)
    centers = np.asarray(centers, dtype=np.intp)
    part_ids = np.asarray(part_ids)
    if neighbor_lists.shape[0] != centers.size:
        raise ValidationError("one neighbor list per center is required")
    if neighbor_lists.size == 0:
        raise ValidationError("no neighbors to score")
    same = part_ids[neighbor_lists] == part_ids[centers][:, None]
    return float(np.count_nonzero(same)) / same.size


# ==================== Geodesic neighborhood grouper ====================

@dataclass
class GroupedLevel:
    """One level of the grouping hierarchy.

    center_indices index the parent cloud; row r of neighbor_indices,
    neighbor_geodesics and descriptors belongs to center_indices[r].
    """

    center_indices: np.ndarray
    neighbor_indices: np.ndarray
    neighbor_geodesics: np.ndarray
    descriptors: np.ndarray

    @property
    def k(self) -> int:
        return int(self.neighbor_indices.shape[1])

    def check(self) -> None:
        n_centers = self.center_indices.size
        if self.neighbor_indices.shape[0] != n_centers or self.neighbor_geodesics.shape != self.neighbor_indices.shape:
            raise InvariantViolation("neighbor arrays do not match the center count")
        if self.descriptors.shape[0] != n_centers:
            raise InvariantViolation("descriptor rows do not match the center count")
        for row, center in enumerate(self.center_indices):
            neighbors = self.neighbor_indices[row]
            if np.unique(neighbors).size != neighbors.size:
                raise InvariantViolation(f"center {center}: repeated neighbor")
            if np.any(neighbors == center):
                raise InvariantViolation(f"center {center}: listed as its own neighbor")
            d = self.neighbor_geodesics[row]
            if np.any(d < 0) or np.any(np.diff(d) < 0):
                raise InvariantViolation(f"center {center}: neighbor geodesics not ascending and >= 0")

    def to_dict(self) -> Dict:
        return {
            "center_indices": self.center_indices.tolist(),
            "neighbor_indices": self.neighbor_indices.tolist(),
            "neighbor_geodesics": [[_json_float(v) for v in row] for row in self.neighbor_geodesics],
            "descriptors": self.descriptors.tolist(),
        }


def finite_geodesics(cloud: PointCloud, center: int, neighbors: np.ndarray, dists: np.ndarray) -> np.ndarray:
    """Replace unreachable (infinite) geodesics by the straight-line distance."""
    dists = np.asarray(dists, dtype=np.float64)
    bad = ~np.isfinite(dists)
    if not bad.any():
        return dists
    out = dists.copy()
    out[bad] = euclidean_to(cloud.positions[neighbors[bad]], cloud.positions[center])
    return out


def _check_level_sizes(level_sizes: Sequence[int], n: int) -> List[int]:
    sizes = [int(s) for s in level_sizes]
    if not sizes:
        raise ValidationError("level_sizes must not be empty")
    if sizes[0] > n or min(sizes) < 1:
        raise ValidationError(f"level sizes must lie in [1, {n}], got {sizes}")
    if any(b >= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError(f"level_sizes must be strictly decreasing, got {sizes}")
    return sizes


def gng_build(
    cloud: PointCloud,
    engine: GeodesicEngine,
    level_sizes: Sequence[int],
    k: int,
    fps_seed: int = 0,
    params: Optional[RelationMlpParams] = None,
    descriptor_width: int = 16,
    metric: str = "geodesic",
    pool: str = "cloud",
    mlp_seed: int = 0,
) -> List[GroupedLevel]:
    """Hierarchical FPS downsampling with geodesic neighbor grouping.

    Each descriptor is the channelwise max over a center's neighbors of the
    shared MLP applied to [f_j, x_j - x_center, d_g(center, j)], where f_j
    are the cloud's point features ([xyz | features]).

    Args:
        cloud: Input cloud
        engine: Engine built over the same cloud
        level_sizes: Strictly decreasing center counts, first <= N
        k: Neighbors per center
        fps_seed: Seed index of the level-0 FPS
        params: Descriptor MLP; seeded random weights when omitted
        descriptor_width: Output width when params is omitted
        metric: 'geodesic', or 'euclidean' to group by straight-line k-NN
        pool: 'cloud' draws neighbors from all points, 'parent' from the
            set the level was sampled from
        mlp_seed: Seed for the default descriptor MLP

    Returns:
        One GroupedLevel per entry of level_sizes
    """
    if engine.n != cloud.n:
        raise ValidationError("engine was built over a different cloud")
    sizes = _check_level_sizes(level_sizes, cloud.n)
    if not 1 <= int(k) < cloud.n:
        raise ValidationError(f"k={k} must satisfy 1 <= k < N={cloud.n}")
    if metric not in GROUPING_METRICS:
        raise ValidationError(f"grouping metric must be one of {GROUPING_METRICS}, got '{metric}'")
    if pool not in NEIGHBOR_POOLS:
        raise ValidationError(f"neighbor pool must be one of {NEIGHBOR_POOLS}, got '{pool}'")

    point_features = cloud.point_features()
    in_width = point_features.shape[1] + 3 + 1
    if params is None:
        params = RelationMlpParams.random(in_width, descriptor_width, seed=mlp_seed)
    elif params.in_width != in_width:
        raise ValidationError(f"descriptor MLP expects width {params.in_width}, inputs have {in_width}")

    levels: List[GroupedLevel] = []
    parent = np.arange(cloud.n)
    for depth, size in enumerate(sizes):
        if depth == 0:
            centers = np.asarray(fps(cloud, size, fps_seed).indices, dtype=np.intp)
        else:
            picked = fps(cloud.subset(parent), size, 0).indices
            centers = parent[np.asarray(picked, dtype=np.intp)]
        candidates = None if pool == "cloud" else parent
        if candidates is not None and k > candidates.size - 1:
            raise ValidationError(f"k={k} is infeasible for a parent level of {candidates.size} points")

        neighbor_idx = np.empty((centers.size, k), dtype=np.intp)
        neighbor_d = np.empty((centers.size, k))
        descriptors = np.empty((centers.size, params.out_width))
        for row, center in enumerate(centers):
            if metric == "geodesic":
                idx, d = geodesic_knn(engine, int(center), k, candidates)
            else:
                idx, d = euclidean_knn(cloud, int(center), k, candidates)
            neighbor_idx[row], neighbor_d[row] = idx, d

            d_in = finite_geodesics(cloud, int(center), idx, d)
            offsets = cloud.positions[idx] - cloud.positions[center]
            grouped = np.hstack([point_features[idx], offsets, d_in[:, None]])
            descriptors[row] = params.forward(grouped).max(axis=0)

        level = GroupedLevel(centers, neighbor_idx, neighbor_d, descriptors)
        level.check()
        levels.append(level)
        logger.debug("Level %d: %d centers, k=%d, metric=%s", depth, centers.size, k, metric)
        parent = centers
    return levels


# ==================== Geodesic-relational attention ====================

@dataclass
class AttentionOutput:
    """refined[i] = sum_j weights[i, j] * f_j; weights is (P, k, C)."""

    refined: np.ndarray
    weights: np.ndarray

    def check(self, atol: float = 1e-6) -> None:
        if np.any(self.weights < 0):
            raise InvariantViolation("negative attention weight")
        if not np.allclose(self.weights.sum(axis=1), 1.0, rtol=0.0, atol=atol):
            raise InvariantViolation("attention weights do not sum to 1 per channel")


def gra_t_forward(
    features: np.ndarray,
    neighbor_indices: np.ndarray,
    neighbor_geodesics: np.ndarray,
    params: RelationMlpParams,
    center_indices: Optional[Sequence[int]] = None,
) -> AttentionOutput:
    """Attention over geodesic neighbors with per-channel softmax.

    r_ij = MLP([f_i - f_j, d_ij]); alpha_ij = softmax over j of r_ij, per channel;
    f'_i = sum_j alpha_ij * f_j.

    Args:
        features: (N, C) rows addressed by all indices below
        neighbor_indices: (P, k) neighbor rows per attending point
        neighbor_geodesics: (P, k) matching distances
        params: Relation MLP of widths (C + 1) -> H -> C
        center_indices: Row of features for each attending point
            (default 0..P-1)

    Returns:
        AttentionOutput with refined (P, C) and weights (P, k, C)
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValidationError(f"features must be a matrix, got shape {features.shape}")
    n, c = features.shape
    neighbors = np.asarray(neighbor_indices, dtype=np.intp)
    dists = np.asarray(neighbor_geodesics, dtype=np.float64)
    if neighbors.ndim != 2 or neighbors.shape[1] == 0:
        raise ValidationError("neighbor lists must be nonempty")
    if dists.shape != neighbors.shape:
        raise ValidationError(f"geodesics shape {dists.shape} != neighbor shape {neighbors.shape}")
    if params.out_width != c or params.in_width != c + 1:
        raise ValidationError(
            f"relation MLP maps {params.in_width} -> {params.out_width}, features need {c + 1} -> {c}"
        )
    if not np.all(np.isfinite(features)) or not np.all(np.isfinite(dists)):
        raise ValidationError("attention inputs contain NaN or Inf")

    centers = np.arange(neighbors.shape[0]) if center_indices is None else np.asarray(center_indices, dtype=np.intp)
    if centers.size != neighbors.shape[0]:
        raise ValidationError("one center per neighbor list is required")
    for name, idx in (("center", centers), ("neighbor", neighbors)):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            bad = idx[(idx < 0) | (idx >= n)].flat[0]
            check_index(name, int(bad), n)

    f_i = features[centers][:, None, :]
    f_j = features[neighbors]
    relation = params.forward(np.concatenate([f_i - f_j, dists[:, :, None]], axis=2))

    relation = relation - relation.max(axis=1, keepdims=True)
    expo = np.exp(relation)
    weights = expo / expo.sum(axis=1, keepdims=True)
    refined = (weights * f_j).sum(axis=1)

    output = AttentionOutput(refined=refined, weights=weights)
    output.check()
    return output


# ==================== Manifold positional embedding ====================

def mpe_augment(features: Optional[np.ndarray], engine: GeodesicEngine, point_indices: Sequence[int]) -> np.ndarray:
    """Append each point's anchor distance vector: [f_i, d_g(p_i, A)].

    Args:
        features: (P, C) rows aligned with point_indices; None means C = 0
        engine: Geodesic engine
        point_indices: Cloud index of every row

    Returns:
        (P, C + M) augmented rows
    """
    idx = np.asarray(point_indices, dtype=np.intp).reshape(-1)
    if features is None:
        features = np.zeros((idx.size, 0))
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    if features.shape[0] != idx.size:
        raise ValidationError(f"{features.shape[0]} feature rows for {idx.size} point indices")
    return np.hstack([features, engine.anchor_distance_matrix(idx)])


def _json_float(value: float):
    return "inf" if np.isinf(value) else float(value)
