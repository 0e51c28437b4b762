"""
Graph geodesics and the anchor-based geodesic approximator.

approx(i, j) = min over anchors u (near i) and v (near j) of
    leg(i, u) + D_A[u, v] + leg(j, v)
where D_A holds shortest-path distances between anchors on the proximity
graph and leg() is either the straight-line or the graph distance.
"""

import heapq
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra
from scipy.spatial.distance import cdist

from .cloud_core import PointCloud
from .config import config
from .errors import InvariantViolation, ValidationError, check_index
from .log import get_logger
from .sampling_graph import ProximityGraph, euclidean_to, fps

logger = get_logger(__name__)

LEG_METRICS = ("euclidean", "graph")
INF = float("inf")

# upper bound on elements materialized per vectorized min-plus step
_CHUNK_ELEMENTS = 1 << 22


def dijkstra(graph: ProximityGraph, source: int) -> np.ndarray:
    """Single-source shortest paths with a binary heap and lazy deletion.

    Args:
        graph: Proximity graph
        source: Source vertex

    Returns:
        Distance row of length n; unreachable vertices hold +inf
    """
    source = check_index("source", source, graph.n)
    indptr = graph.matrix.indptr.tolist()
    indices = graph.matrix.indices.tolist()
    weights = graph.matrix.data.tolist()

    dist = [INF] * graph.n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue  # stale entry
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            nd = d + weights[p]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return np.asarray(dist, dtype=np.float64)


def shortest_path_rows(graph: ProximityGraph, sources: Sequence[int], n_jobs: int = 1) -> np.ndarray:
    """Shortest-path rows for many sources using the compiled Dijkstra.

    Rows are independent, so with n_jobs > 1 source chunks run on a thread
    pool; the output is identical to the sequential order.
    """
    sources = np.asarray(sources, dtype=np.intp)
    if sources.size == 0:
        return np.zeros((0, graph.n))
    if n_jobs <= 1 or sources.size < 2 * n_jobs:
        return _csgraph_dijkstra(graph.matrix, directed=False, indices=sources)

    chunks = np.array_split(sources, n_jobs)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        parts = list(pool.map(
            lambda chunk: _csgraph_dijkstra(graph.matrix, directed=False, indices=chunk),
            chunks,
        ))
    return np.vstack(parts)


def exact_geodesic_oracle(graph: ProximityGraph, i: int, j: int) -> float:
    """Exact graph geodesic d_G(i, j) by a full Dijkstra run from i."""
    j = check_index("j", j, graph.n)
    return float(dijkstra(graph, i)[j])


def exact_geodesic_matrix(graph: ProximityGraph, sources: Optional[Sequence[int]] = None) -> np.ndarray:
    """All-pairs (or selected-rows) exact graph geodesics."""
    if sources is None:
        sources = np.arange(graph.n)
    return shortest_path_rows(graph, sources)


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """FPS-selected anchors and their pairwise graph geodesics."""

    anchor_indices: np.ndarray
    anchor_matrix: np.ndarray

    @property
    def m(self) -> int:
        return int(len(self.anchor_indices))

    def check(self, positions: Optional[np.ndarray] = None, rtol: float = 1e-9) -> None:
        """Verify symmetry, zero diagonal, triangle inequality and the Euclidean floor."""
        a = self.anchor_matrix
        if a.shape != (self.m, self.m):
            raise InvariantViolation(f"anchor matrix shape {a.shape} != ({self.m}, {self.m})")
        if not np.array_equal(a, a.T):
            raise InvariantViolation("anchor matrix is not symmetric")
        if np.any(np.diag(a) != 0):
            raise InvariantViolation("anchor matrix diagonal is not zero")

        for w in range(self.m):
            via = a[:, w][:, None] + a[w, :][None, :]
            finite = np.isfinite(a) & np.isfinite(via)
            if np.any(a[finite] > via[finite] * (1 + rtol) + rtol):
                raise InvariantViolation(f"triangle inequality violated through anchor {w}")

        if positions is not None:
            pts = positions[self.anchor_indices]
            straight = cdist(pts, pts)
            finite = np.isfinite(a)
            if np.any(a[finite] < straight[finite] * (1 - rtol) - rtol):
                raise InvariantViolation("anchor geodesic shorter than the straight line")

    def to_dict(self) -> Dict:
        return {
            "anchor_indices": [int(i) for i in self.anchor_indices],
            "anchor_matrix": [[_json_float(v) for v in row] for row in self.anchor_matrix],
        }


class GeodesicEngine:
    """Read-only query object for approximate geodesics.

    Built once by build_engine; every array is frozen afterwards so the
    engine can serve concurrent queries.
    """

    def __init__(
        self,
        cloud: PointCloud,
        graph: ProximityGraph,
        anchors: AnchorSet,
        point_to_anchor: np.ndarray,
        leg_metric: str,
        candidate_count: int,
    ):
        self.cloud = cloud
        self.graph = graph
        self.anchors = anchors
        self.point_to_anchor = point_to_anchor
        self.leg_metric = leg_metric
        self.candidate_count = candidate_count

        # s nearest anchors per point; stable sort puts the lower column first on ties
        self.candidates = np.argsort(point_to_anchor, axis=1, kind="stable")[:, :candidate_count]
        for array in (self.point_to_anchor, self.candidates, anchors.anchor_matrix, anchors.anchor_indices):
            array.setflags(write=False)

    @property
    def n(self) -> int:
        return self.cloud.n

    @property
    def m(self) -> int:
        return self.anchors.m

    @property
    def s(self) -> int:
        return self.candidate_count

    def _one_sided(self, i: int, j: int) -> float:
        # min over v in S_j of ( min over u in S_i of (leg_i[u] + D_A[u, v]) ) + leg_j[v]
        su, sv = self.candidates[i], self.candidates[j]
        inner = self.point_to_anchor[i, su][:, None] + self.anchors.anchor_matrix[np.ix_(su, sv)]
        return float((inner.min(axis=0) + self.point_to_anchor[j, sv]).min())

    def approx(self, i: int, j: int) -> float:
        i = check_index("i", i, self.n)
        j = check_index("j", j, self.n)
        if i == j:
            return 0.0
        # both association orders, so the result is exactly symmetric in (i, j)
        return min(self._one_sided(i, j), self._one_sided(j, i))

    def distances_from(self, center: int, others: Optional[Sequence[int]] = None) -> np.ndarray:
        """approx(center, j) for every j in others (default: all points)."""
        center = check_index("center", center, self.n)
        js = np.arange(self.n) if others is None else np.asarray(others, dtype=np.intp)
        if js.size and (js.min() < 0 or js.max() >= self.n):
            bad = int(js[(js < 0) | (js >= self.n)][0])
            check_index("j", bad, self.n)

        legs, amat, cand = self.point_to_anchor, self.anchors.anchor_matrix, self.candidates
        s = self.s

        # center -> j: one row of G = min_u (leg_c[u] + D_A[u, :])
        sc = cand[center]
        g_center = (legs[center, sc][:, None] + amat[sc, :]).min(axis=0)
        cj = cand[js]
        forward = (g_center[cj] + np.take_along_axis(legs[js], cj, axis=1)).min(axis=1)

        # j -> center
        backward = np.empty(js.size)
        step = max(1, _CHUNK_ELEMENTS // (s * s))
        for start in range(0, js.size, step):
            block = js[start:start + step]
            cb = cand[block]
            inner = np.take_along_axis(legs[block], cb, axis=1)[:, :, None] + amat[cb][:, :, sc]
            backward[start:start + step] = (inner.min(axis=1) + legs[center, sc][None, :]).min(axis=1)

        out = np.minimum(forward, backward)
        out[js == center] = 0.0
        return out

    def pairwise(self, rows: Optional[Sequence[int]] = None) -> np.ndarray:
        """Approximate geodesics between all points (or the given rows and all points).

        Uses two chunked min-plus products; values are identical to approx().
        """
        legs, amat, cand = self.point_to_anchor, self.anchors.anchor_matrix, self.candidates
        n, m, s = self.n, self.m, self.s
        row_idx = np.arange(n) if rows is None else np.asarray(rows, dtype=np.intp)

        # G[i, v] = min over u in S_i of leg_i[u] + D_A[u, v]
        g = np.empty((n, m))
        step = max(1, _CHUNK_ELEMENTS // (s * m))
        for start in range(0, n, step):
            block = np.arange(start, min(start + step, n))
            cb = cand[block]
            g[block] = (np.take_along_axis(legs[block], cb, axis=1)[:, :, None] + amat[cb]).min(axis=1)

        # T[i, j] = min over v in S_j of G[i, v] + leg_j[v]
        legs_sel = np.take_along_axis(legs, cand, axis=1)
        g_rows = g[row_idx]
        t_forward = np.empty((row_idx.size, n))
        t_backward = np.empty((row_idx.size, n))
        step = max(1, _CHUNK_ELEMENTS // (max(row_idx.size, n) * s))
        for start in range(0, n, step):
            cols = np.arange(start, min(start + step, n))
            t_forward[:, cols] = (g_rows[:, cand[cols]] + legs_sel[cols][None, :, :]).min(axis=2)
        for start in range(0, row_idx.size, step):
            rsel = row_idx[start:start + step]
            # T[j, i] for every j and i in this row block
            t_backward[start:start + step] = (
                g[:, cand[rsel]] + legs_sel[rsel][None, :, :]
            ).min(axis=2).T

        out = np.minimum(t_forward, t_backward)
        out[np.arange(row_idx.size), row_idx] = 0.0
        return out

    def anchor_distance_vector(self, i: int) -> np.ndarray:
        """Geodesic distance vector from point i to every anchor (min over all u)."""
        i = check_index("i", i, self.n)
        return (self.point_to_anchor[i][:, None] + self.anchors.anchor_matrix).min(axis=0)

    def anchor_distance_matrix(self, indices: Sequence[int]) -> np.ndarray:
        """anchor_distance_vector for many points, one row each."""
        idx = np.asarray(indices, dtype=np.intp)
        for i in idx:
            check_index("i", int(i), self.n)
        out = np.empty((idx.size, self.m))
        step = max(1, _CHUNK_ELEMENTS // (self.m * self.m))
        amat = self.anchors.anchor_matrix
        for start in range(0, idx.size, step):
            block = idx[start:start + step]
            out[start:start + step] = (self.point_to_anchor[block][:, :, None] + amat[None, :, :]).min(axis=1)
        return out

    def nearest_anchor(self, i: int) -> Tuple[int, float]:
        """Column and leg distance of the closest anchor to point i."""
        i = check_index("i", i, self.n)
        u = int(np.argmin(self.point_to_anchor[i]))
        return u, float(self.point_to_anchor[i, u])

    def euclidean(self, i: int, others: Sequence[int]) -> np.ndarray:
        positions = self.cloud.positions
        return euclidean_to(positions[np.asarray(others, dtype=np.intp)], positions[i])

    def to_dict(self) -> Dict:
        data = self.anchors.to_dict()
        data.update({"leg_metric": self.leg_metric, "s": self.s})
        return data


def build_engine(
    cloud: PointCloud,
    graph: ProximityGraph,
    m_anchors: Optional[int] = None,
    leg_metric: Optional[str] = None,
    s: Optional[int] = None,
    fps_seed: Optional[int] = None,
    n_jobs: int = 1,
) -> GeodesicEngine:
    """Select anchors by FPS and precompute every table the queries need.

    Args:
        cloud: Input cloud
        graph: Proximity graph over the same cloud
        m_anchors: Number of anchors (default config.M_ANCHORS, capped at N)
        leg_metric: 'euclidean' (straight legs) or 'graph' (shortest-path legs)
        s: Candidate anchors per endpoint; None means all anchors
        fps_seed: Seed index for anchor FPS
        n_jobs: Threads for the per-anchor Dijkstra runs

    Returns:
        Frozen GeodesicEngine
    """
    if graph.n != cloud.n:
        raise ValidationError(f"graph has {graph.n} vertices but cloud has {cloud.n} points")
    if m_anchors is None:
        m_anchors = min(config.M_ANCHORS, cloud.n)
    leg_metric = (leg_metric or config.LEG_METRIC).lower()
    if leg_metric not in LEG_METRICS:
        raise ValidationError(f"leg_metric must be one of {LEG_METRICS}, got '{leg_metric}'")
    fps_seed = config.FPS_SEED if fps_seed is None else fps_seed

    started = time.perf_counter()
    sample = fps(cloud, m_anchors, fps_seed)
    anchor_idx = np.asarray(sample.indices, dtype=np.intp)
    m = anchor_idx.size

    if s is None:
        s = m
    if s < 1:
        raise ValidationError(f"candidate count s must be >= 1, got {s}")
    if s > m:
        logger.info("Candidate count %d exceeds anchor count %d; using %d", s, m, m)
        s = m

    rows = shortest_path_rows(graph, anchor_idx, n_jobs=n_jobs)
    amat = rows[:, anchor_idx]
    amat = np.minimum(amat, amat.T)
    np.fill_diagonal(amat, 0.0)

    unreachable = int(np.count_nonzero(np.isinf(np.triu(amat, k=1))))
    if unreachable:
        logger.warning("%d anchor pairs are unreachable on the proximity graph", unreachable)

    if leg_metric == "euclidean":
        legs = cdist(cloud.positions, cloud.positions[anchor_idx])
    else:
        legs = np.ascontiguousarray(rows.T)

    anchors = AnchorSet(anchor_indices=anchor_idx, anchor_matrix=amat)
    engine = GeodesicEngine(cloud, graph, anchors, legs, leg_metric, int(s))
    logger.info(
        "Built geodesic engine: N=%d, M=%d, s=%d, legs=%s in %.1f ms",
        cloud.n, m, engine.s, leg_metric, (time.perf_counter() - started) * 1e3,
    )
    return engine


def approx_geodesic(engine: GeodesicEngine, i: int, j: int) -> float:
    """Anchor-based approximate geodesic between points i and j (0 when i == j)."""
    return engine.approx(i, j)


def anchor_distance_vector(engine: GeodesicEngine, i: int) -> np.ndarray:
    """Distances from point i to all anchors routed through the anchor matrix."""
    return engine.anchor_distance_vector(i)


def nearest_anchor(engine: GeodesicEngine, i: int) -> Tuple[int, float]:
    """Closest anchor (column, leg distance) to point i; ties go to the lower column."""
    return engine.nearest_anchor(i)


def _json_float(value: float):
    return "inf" if np.isinf(value) else float(value)
