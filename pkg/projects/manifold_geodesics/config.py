"""
Configuration for the manifold geodesics toolkit.
Defaults can be overridden through environment variables.
"""

import os
from pathlib import Path
from typing import Dict, List


def _int_list(raw: str) -> List[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


class GeodesicConfig:
    """Configuration class for graph, anchor, grouping and benchmark defaults."""

    # Proximity graph
    K_GRAPH: int = int(os.getenv("MANIFOLD_K_GRAPH", "8"))

    # Anchor engine
    M_ANCHORS: int = int(os.getenv("MANIFOLD_M_ANCHORS", "128"))
    LEG_METRIC: str = os.getenv("MANIFOLD_LEG_METRIC", "euclidean").lower()
    CANDIDATES: int = int(os.getenv("MANIFOLD_CANDIDATES", "8"))
    FPS_SEED: int = int(os.getenv("MANIFOLD_FPS_SEED", "0"))

    # Geodesic neighborhood grouping
    GROUP_K: int = int(os.getenv("MANIFOLD_GROUP_K", "16"))
    LEVEL_SIZES: List[int] = _int_list(os.getenv("MANIFOLD_LEVEL_SIZES", "512,128"))

    # Relation MLP hidden width multiplier (H = HIDDEN_RATIO * C)
    HIDDEN_RATIO: int = int(os.getenv("MANIFOLD_HIDDEN_RATIO", "2"))

    # Metrics
    FSCORE_THRESHOLD: float = float(os.getenv("MANIFOLD_FSCORE_THRESHOLD", "0.01"))

    # Benchmark harness
    BENCH_TRIALS: int = int(os.getenv("MANIFOLD_BENCH_TRIALS", "5"))
    BENCH_QUERIES: int = int(os.getenv("MANIFOLD_BENCH_QUERIES", "256"))
    BENCH_ANCHORS: List[int] = _int_list(os.getenv("MANIFOLD_BENCH_ANCHORS", "64,128,256,2048"))

    # General
    SEED: int = int(os.getenv("MANIFOLD_SEED", "0"))
    LOG_LEVEL: str = os.getenv("MANIFOLD_LOG_LEVEL", "INFO").upper()

    # Presets shipped with the project
    CONFIGS_DIR: Path = Path(__file__).parent / "configs"
    SAMPLE_DATA_DIR: Path = Path(__file__).parent / "sample_data"

    @classmethod
    def validate(cls) -> Dict:
        """Validate configuration."""
        problems = []
        if cls.K_GRAPH < 1:
            problems.append("MANIFOLD_K_GRAPH must be >= 1")
        if cls.M_ANCHORS < 1:
            problems.append("MANIFOLD_M_ANCHORS must be >= 1")
        if cls.LEG_METRIC not in ("euclidean", "graph"):
            problems.append("MANIFOLD_LEG_METRIC must be 'euclidean' or 'graph'")
        if cls.CANDIDATES < 1:
            problems.append("MANIFOLD_CANDIDATES must be >= 1")
        if cls.FSCORE_THRESHOLD <= 0:
            problems.append("MANIFOLD_FSCORE_THRESHOLD must be > 0")
        if any(b >= a for a, b in zip(cls.LEVEL_SIZES, cls.LEVEL_SIZES[1:])):
            problems.append("MANIFOLD_LEVEL_SIZES must be strictly decreasing")
        return {
            "k_graph": cls.K_GRAPH,
            "m_anchors": cls.M_ANCHORS,
            "leg_metric": cls.LEG_METRIC,
            "candidates": cls.CANDIDATES,
            "group_k": cls.GROUP_K,
            "level_sizes": cls.LEVEL_SIZES,
            "fscore_threshold": cls.FSCORE_THRESHOLD,
            "problems": problems,
        }

    @classmethod
    def preset_path(cls, name: str) -> Path:
        """Path of a preset pipeline config shipped under configs/."""
        return cls.CONFIGS_DIR / f"{name}.json"


# Create singleton instance
config = GeodesicConfig()
