"""
Farthest point sampling and the sparse Euclidean k-NN proximity graph.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _connected_components
from scipy.spatial.distance import cdist

from .cloud_core import PointCloud
from .errors import DuplicatePointError, InvariantViolation, ValidationError, check_index
from .log import get_logger

logger = get_logger(__name__)

# rows of the distance matrix materialized at once during graph construction
_BLOCK_ROWS = 1024


def euclidean_to(points: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Distances from every row of points to one target point."""
    diff = points - target
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass
class SampleResult:
    """Ordered FPS selection.

    min_dists[t] is the maximin distance achieved at step t; the seed has no
    predecessor so min_dists[0] is +inf. coverage_radius is the largest
    distance from any point to the selected set after the last step.
    """

    indices: List[int]
    min_dists: List[float]
    coverage_radius: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "indices": list(self.indices),
            "min_dists": [_json_float(d) for d in self.min_dists],
            "coverage_radius": self.coverage_radius,
        }


def fps(cloud: PointCloud, m: int, seed_index: int = 0) -> SampleResult:
    """Farthest point sampling.

    Args:
        cloud: Input cloud
        m: Number of points to select (1 <= m <= N)
        seed_index: First selected index

    Returns:
        SampleResult; ties are broken by the lowest index
    """
    n = cloud.n
    if not 1 <= int(m) <= n:
        raise ValidationError(f"m={m} must satisfy 1 <= m <= N={n}")
    seed_index = check_index("seed_index", seed_index, n)

    positions = cloud.positions
    min_d = euclidean_to(positions, positions[seed_index])
    selected = np.zeros(n, dtype=bool)
    selected[seed_index] = True
    indices = [seed_index]
    min_dists = [float("inf")]

    for _ in range(1, int(m)):
        masked = np.where(selected, -np.inf, min_d)
        chosen = int(np.argmax(masked))  # first maximum = lowest index
        indices.append(chosen)
        min_dists.append(float(min_d[chosen]))
        selected[chosen] = True
        np.minimum(min_d, euclidean_to(positions, positions[chosen]), out=min_d)

    remaining = min_d[~selected]
    coverage = float(remaining.max()) if remaining.size else 0.0
    return SampleResult(indices=indices, min_dists=min_dists, coverage_radius=coverage)


@dataclass
class ProximityGraph:
    """Symmetric weighted adjacency over cloud indices.

    Stored as a CSR matrix with sorted column indices; each undirected edge
    appears once per direction.
    """

    n: int
    matrix: sparse.csr_matrix
    _adjacency: Optional[List[List[Tuple[int, float]]]] = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n: int, edges: List[Tuple[int, int, float]]) -> "ProximityGraph":
        """Build from undirected (i, j, w) triples."""
        if edges:
            arr = np.asarray(edges, dtype=np.float64).reshape(-1, 3)
            i = arr[:, 0].astype(np.intp)
            j = arr[:, 1].astype(np.intp)
            w = arr[:, 2]
        else:
            i = j = np.zeros(0, dtype=np.intp)
            w = np.zeros(0)
        if np.any((i < 0) | (i >= n) | (j < 0) | (j >= n)):
            raise ValidationError("edge endpoint out of range")
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        keys, counts = np.unique(lo * n + hi, return_counts=True)
        if np.any(counts > 1):
            repeated = int(keys[np.argmax(counts > 1)])
            raise ValidationError(
                f"edge ({repeated // n}, {repeated % n}) listed more than once"
            )
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        data = np.concatenate([w, w])
        matrix = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
        matrix.sum_duplicates()
        matrix.sort_indices()
        graph = cls(n=n, matrix=matrix)
        graph.check()
        return graph

    @property
    def edge_count(self) -> int:
        return int(self.matrix.nnz // 2)

    @property
    def adjacency(self) -> List[List[Tuple[int, float]]]:
        """Per-vertex list of (neighbor, weight), sorted by neighbor index."""
        if self._adjacency is None:
            indptr, indices, data = self.matrix.indptr, self.matrix.indices, self.matrix.data
            self._adjacency = [
                [(int(indices[p]), float(data[p])) for p in range(indptr[v], indptr[v + 1])]
                for v in range(self.n)
            ]
        return self._adjacency

    def degree(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def edges(self) -> List[Tuple[int, int, float]]:
        """Undirected edges with i < j, sorted lexicographically."""
        upper = sparse.triu(self.matrix, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return [(int(upper.row[p]), int(upper.col[p]), float(upper.data[p])) for p in order]

    def check(self) -> None:
        """Raise InvariantViolation unless symmetric, positive, finite and loop-free."""
        m = self.matrix
        if m.shape != (self.n, self.n):
            raise InvariantViolation(f"adjacency shape {m.shape} does not match n={self.n}")
        if m.diagonal().any():
            raise InvariantViolation("graph contains a self-loop")
        if m.nnz and (not np.all(np.isfinite(m.data)) or np.any(m.data <= 0)):
            raise InvariantViolation("edge weights must be finite and strictly positive")
        if (m != m.T).nnz:
            raise InvariantViolation("adjacency is not symmetric")

    def to_dict(self) -> Dict:
        return {"n": self.n, "edges": [[i, j, w] for i, j, w in self.edges()]}

    @classmethod
    def from_dict(cls, data: Dict) -> "ProximityGraph":
        return cls.from_edges(int(data["n"]), [tuple(e) for e in data["edges"]])


def build_knn_graph(cloud: PointCloud, k_graph: int) -> ProximityGraph:
    """Exact Euclidean k-NN graph, symmetrized by edge union.

    Args:
        cloud: Input cloud without coincident points
        k_graph: Neighbors per point (1 <= k_graph < N)

    Returns:
        ProximityGraph whose edge weights are Euclidean lengths
    """
    n = cloud.n
    if not 1 <= int(k_graph) < n:
        raise ValidationError(f"k_graph={k_graph} must satisfy 1 <= k_graph < N={n}")
    k_graph = int(k_graph)
    positions = cloud.positions

    src_parts, dst_parts, w_parts = [], [], []
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        block = cdist(positions[start:stop], positions)
        rows = np.arange(stop - start)
        block[rows, rows + start] = np.inf

        zero_r, zero_c = np.nonzero(block == 0.0)
        if zero_r.size:
            a, b = int(zero_r[0] + start), int(zero_c[0])
            raise DuplicatePointError((min(a, b), max(a, b)))

        # stable sort keeps the lower index first among equal distances
        order = np.argsort(block, axis=1, kind="stable")[:, :k_graph]
        src_parts.append(np.repeat(np.arange(start, stop), k_graph))
        dst_parts.append(order.ravel())
        w_parts.append(np.take_along_axis(block, order, axis=1).ravel())

    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    weights = np.concatenate(w_parts)
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    _, first = np.unique(lo * n + hi, return_index=True)
    edges = list(zip(lo[first].tolist(), hi[first].tolist(), weights[first].tolist()))

    graph = ProximityGraph.from_edges(n, edges)
    components = connected_components(graph)
    n_components = int(components.max()) + 1
    if n_components > 1:
        logger.warning("Proximity graph has %d connected components (k_graph=%d)", n_components, k_graph)
    logger.debug("Built k-NN graph: %d vertices, %d edges", n, graph.edge_count)
    return graph


def connected_components(graph: ProximityGraph) -> np.ndarray:
    """Component label per vertex."""
    _, labels = _connected_components(graph.matrix, directed=False)
    return labels


def count_shortcut_edges(graph: ProximityGraph, part_ids: np.ndarray) -> int:
    """Number of edges joining points with different part ids."""
    part_ids = np.asarray(part_ids)
    if len(part_ids) != graph.n:
        raise ValidationError(f"part id array has length {len(part_ids)}, graph has {graph.n} vertices")
    upper = sparse.triu(graph.matrix, k=1).tocoo()
    return int(np.count_nonzero(part_ids[upper.row] != part_ids[upper.col]))


def _json_float(value: float):
    return "inf" if value == float("inf") else value
