"""
Anchor-count scaling benchmark for the geodesic engine.

For every trial a fresh synthetic cloud is generated; all anchor counts of a
trial share that cloud, its proximity graph and one batch of query pairs, so
the anchor sets form nested FPS prefixes. Timings are reported as medians over
trials with the raw samples kept alongside.
"""

import platform
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

from .cloud_core import SYNTHETIC_KINDS, gen_synthetic
from .config import config
from .errors import InvariantViolation, ValidationError
from .geodesic import LEG_METRICS, build_engine, shortest_path_rows
from .log import get_logger
from .sampling_graph import build_knn_graph

logger = get_logger(__name__)


@dataclass
class AnchorTiming:
    """Median results for one anchor count."""

    m_anchors: int
    build_ms: float
    mean_query_us: float
    total_ms: float
    mean_abs_rel_error_vs_oracle: float
    samples: Dict[str, List[float]] = field(default_factory=dict)


@dataclass
class BenchReport:
    """Anchor scaling results."""

    n_points: int
    anchor_counts: List[int]
    results: List[AnchorTiming]
    environment: str
    settings: Dict = field(default_factory=dict)

    def check(self) -> None:
        if any(b <= a for a, b in zip(self.anchor_counts, self.anchor_counts[1:])):
            raise InvariantViolation("anchor counts are not strictly increasing")
        for row in self.results:
            if row.build_ms <= 0 or row.mean_query_us <= 0:
                raise InvariantViolation(f"non-positive timing for M={row.m_anchors}")
            if not row.mean_abs_rel_error_vs_oracle >= 0:
                raise InvariantViolation(f"invalid error for M={row.m_anchors}")

    def ordering(self) -> Dict[str, bool]:
        """Whether total time increases and error does not increase with M."""
        totals = [row.total_ms for row in self.results]
        errors = [row.mean_abs_rel_error_vs_oracle for row in self.results]
        return {
            "time_increasing": all(b > a for a, b in zip(totals, totals[1:])),
            "error_non_increasing": all(b <= a for a, b in zip(errors, errors[1:])),
        }

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["ordering"] = self.ordering()
        return data


def describe_environment() -> str:
    return (
        f"{platform.platform()}; cpu={platform.processor() or platform.machine()}; "
        f"python={platform.python_version()}; numpy={np.__version__}; scipy={scipy.__version__}"
    )


def _relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    usable = np.isfinite(exact) & (exact > 0)
    if not usable.any():
        return 0.0
    a, e = approx[usable], exact[usable]
    # an unreachable approximation of a reachable pair counts as 100% error
    err = np.where(np.isfinite(a), np.abs(a - e) / e, 1.0)
    return float(err.mean())


def run_anchor_benchmark(
    n: int = 2048,
    anchor_counts: Optional[Sequence[int]] = None,
    trials: Optional[int] = None,
    queries: Optional[int] = None,
    kind: str = "swiss_roll",
    k_graph: Optional[int] = None,
    leg_metric: str = "graph",
    s: Optional[int] = None,
    seed: Optional[int] = None,
    n_jobs: int = 1,
) -> BenchReport:
    """Time engine build and pair queries for a list of anchor counts.

    Args:
        n: Points per synthetic cloud
        anchor_counts: Strictly increasing anchor counts, each <= n
        trials: Repetitions (each on a fresh cloud)
        queries: Random (i, j) pairs timed per anchor count
        kind: Synthetic generator
        k_graph: Proximity graph degree
        leg_metric: Leg metric for the engine
        s: Candidate anchors per endpoint; None uses every anchor
        seed: Base seed; trial t uses seed + t
        n_jobs: Threads for the per-anchor Dijkstra runs (1 keeps timings sequential)

    Returns:
        BenchReport with per-count medians
    """
    anchor_counts = [int(m) for m in (anchor_counts or config.BENCH_ANCHORS)]
    trials = config.BENCH_TRIALS if trials is None else int(trials)
    queries = config.BENCH_QUERIES if queries is None else int(queries)
    k_graph = config.K_GRAPH if k_graph is None else int(k_graph)
    seed = config.SEED if seed is None else int(seed)

    if not anchor_counts:
        raise ValidationError("anchor_counts must not be empty")
    if any(b <= a for a, b in zip(anchor_counts, anchor_counts[1:])):
        raise ValidationError(f"anchor_counts must be strictly increasing, got {anchor_counts}")
    if anchor_counts[0] < 1 or anchor_counts[-1] > n:
        raise ValidationError(f"anchor counts must lie in [1, n={n}], got {anchor_counts}")
    if trials < 1 or queries < 1:
        raise ValidationError("trials and queries must be >= 1")
    if kind not in SYNTHETIC_KINDS:
        raise ValidationError(f"unknown generator '{kind}'")
    if leg_metric not in LEG_METRICS:
        raise ValidationError(f"leg_metric must be one of {LEG_METRICS}")

    rows = []
    for trial in range(trials):
        trial_seed = seed + trial
        cloud, _ = gen_synthetic(kind, n, seed=trial_seed)
        graph = build_knn_graph(cloud, k_graph)

        rng = np.random.default_rng(trial_seed)
        src = rng.integers(0, n, size=queries)
        dst = (src + rng.integers(1, n, size=queries)) % n  # never equal to src
        sources, inverse = np.unique(src, return_inverse=True)
        exact = shortest_path_rows(graph, sources)[inverse, dst]

        for m in anchor_counts:
            started = time.perf_counter()
            engine = build_engine(cloud, graph, m, leg_metric, s=s, fps_seed=0, n_jobs=n_jobs)
            build_s = time.perf_counter() - started

            approx = np.empty(queries)
            started = time.perf_counter()
            for q in range(queries):
                approx[q] = engine.approx(int(src[q]), int(dst[q]))
            query_s = time.perf_counter() - started

            rows.append({
                "trial": trial,
                "m_anchors": m,
                "build_ms": build_s * 1e3,
                "mean_query_us": query_s / queries * 1e6,
                "total_ms": (build_s + query_s) * 1e3,
                "error": _relative_error(approx, exact),
            })
            logger.info(
                "trial %d M=%d: build %.1f ms, query %.1f us/pair, error %.4g",
                trial, m, rows[-1]["build_ms"], rows[-1]["mean_query_us"], rows[-1]["error"],
            )

    frame = pd.DataFrame(rows)
    medians = frame.groupby("m_anchors").median(numeric_only=True)
    results = []
    for m in anchor_counts:
        samples = frame[frame["m_anchors"] == m]
        results.append(AnchorTiming(
            m_anchors=m,
            build_ms=float(medians.loc[m, "build_ms"]),
            mean_query_us=float(medians.loc[m, "mean_query_us"]),
            total_ms=float(medians.loc[m, "total_ms"]),
            mean_abs_rel_error_vs_oracle=float(medians.loc[m, "error"]),
            samples={
                key: samples[key].astype(float).tolist()
                for key in ("build_ms", "mean_query_us", "total_ms", "error")
            },
        ))

    report = BenchReport(
        n_points=n,
        anchor_counts=anchor_counts,
        results=results,
        environment=describe_environment(),
        settings={
            "trials": trials,
            "queries": queries,
            "kind": kind,
            "k_graph": k_graph,
            "leg_metric": leg_metric,
            "s": "all" if s is None else int(s),
            "seed": seed,
            "n_jobs": n_jobs,
        },
    )
    report.check()
    return report
