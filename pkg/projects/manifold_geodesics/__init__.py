"""
Manifold-aware geodesics for point clouds.

Anchor-based geodesic approximation over a k-NN proximity graph, geodesic
neighborhood grouping, geodesic-relational attention, manifold positional
embedding and completion metrics.
"""

from .cloud_core import CloudMeta, PointCloud, gen_synthetic, load_cloud, save_cloud
from .errors import (
    CloudIOError,
    CloudParseError,
    ConfigError,
    DuplicatePointError,
    EmptyCloudError,
    IndexOutOfRangeError,
    InvariantViolation,
    ManifoldError,
    ValidationError,
)
from .geodesic import (
    AnchorSet,
    GeodesicEngine,
    anchor_distance_vector,
    approx_geodesic,
    build_engine,
    dijkstra,
    exact_geodesic_oracle,
    nearest_anchor,
)
from .manifold_features import (
    AttentionOutput,
    GroupedLevel,
    RelationMlpParams,
    euclidean_knn,
    geodesic_knn,
    gng_build,
    gra_t_forward,
    mpe_augment,
    sheet_purity,
)
from .metrics import MetricReport, chamfer, evaluate, f_score, total_loss
from .sampling_graph import ProximityGraph, SampleResult, build_knn_graph, fps

__version__ = "0.1.0"
