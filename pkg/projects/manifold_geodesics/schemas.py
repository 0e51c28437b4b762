"""
Pydantic models for every JSON document read or written by the CLI.

These models are the published schemas: `python -m manifold_geodesics schema
<name>` prints the JSON Schema of any of them. Infinite distances are written
as the string "inf".
"""

from typing import Dict, List, Literal, Optional, Tuple, Type, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

InfFloat = Union[float, Literal["inf"]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ==================== Pipeline configuration ====================

class MlpParamsModel(_Strict):
    """Row-major weights of a one-hidden-layer MLP."""

    w1: List[List[float]]
    b1: List[float]
    w2: List[List[float]]
    b2: List[float]


class SourceSettings(_Strict):
    """Synthetic cloud used when no input file is given."""

    kind: Literal["swiss_roll", "two_planes", "cylinder", "grid"] = "swiss_roll"
    n: int = Field(2048, ge=4)
    params: Dict[str, float] = Field(default_factory=dict)
    seed: int = 0


class GraphSettings(_Strict):
    k_graph: int = Field(8, ge=1)


class EngineSettings(_Strict):
    m_anchors: int = Field(128, ge=1)
    leg_metric: Literal["euclidean", "graph"] = "euclidean"
    s: Optional[int] = Field(8, ge=1)
    fps_seed: int = Field(0, ge=0)


class GroupingSettings(_Strict):
    metric: Literal["geodesic", "euclidean"] = "geodesic"
    level_sizes: List[int] = Field(default_factory=lambda: [512, 128], min_length=1)
    k: int = Field(16, ge=1)
    pool: Literal["cloud", "parent"] = "cloud"
    descriptor_width: int = Field(16, ge=1)
    mlp_seed: int = 0
    params: Optional[MlpParamsModel] = None

    @field_validator("level_sizes")
    @classmethod
    def _strictly_decreasing(cls, sizes: List[int]) -> List[int]:
        if any(s < 1 for s in sizes):
            raise ValueError("level sizes must be >= 1")
        if any(b >= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("level sizes must be strictly decreasing")
        return sizes


class AttentionSettings(_Strict):
    enabled: bool = True
    mlp_seed: int = 1
    hidden_width: Optional[int] = Field(None, ge=1)
    params: Optional[MlpParamsModel] = None


class MpeSettings(_Strict):
    enabled: bool = True


class MetricSettings(_Strict):
    fscore_threshold: float = Field(0.01, gt=0)


class PipelineConfig(_Strict):
    """Complete pipeline configuration; every random draw has a seed field."""

    source: SourceSettings = Field(default_factory=SourceSettings)
    graph: GraphSettings = Field(default_factory=GraphSettings)
    engine: EngineSettings = Field(default_factory=EngineSettings)
    grouping: GroupingSettings = Field(default_factory=GroupingSettings)
    attention: AttentionSettings = Field(default_factory=AttentionSettings)
    mpe: MpeSettings = Field(default_factory=MpeSettings)
    metrics: MetricSettings = Field(default_factory=MetricSettings)


# ==================== Output documents ====================

class GraphDocument(_Strict):
    n: int = Field(ge=1)
    edges: List[Tuple[int, int, float]]

    @model_validator(mode="after")
    def _edges_in_range(self) -> "GraphDocument":
        seen = set()
        for i, j, w in self.edges:
            if not (0 <= i < j < self.n) or w <= 0:
                raise ValueError(f"invalid edge ({i}, {j}, {w})")
            if (i, j) in seen:
                raise ValueError(f"edge ({i}, {j}) listed more than once")
            seen.add((i, j))
        return self


class EngineDocument(_Strict):
    anchor_indices: List[int]
    anchor_matrix: List[List[InfFloat]]
    leg_metric: Literal["euclidean", "graph"]
    s: int = Field(ge=1)


class GeodesicPairsDocument(_Strict):
    """pairs rows are [i, j, d_approx] or [i, j, d_approx, d_oracle]."""

    pairs: List[List[Union[int, InfFloat]]]
    settings: Dict[str, Union[int, str, bool, None]] = Field(default_factory=dict)


class SampleDocument(_Strict):
    indices: List[int]
    min_dists: List[InfFloat]
    coverage_radius: float


class GroupedLevelDocument(_Strict):
    center_indices: List[int]
    neighbor_indices: List[List[int]]
    neighbor_geodesics: List[List[InfFloat]]
    descriptors: List[List[float]]
    refined: List[List[float]]
    augmented: List[List[InfFloat]]
    nearest_anchor: List[Tuple[int, InfFloat]]


class MetricReportDocument(_Strict):
    cd_l1: float = Field(ge=0)
    cd_l2: float = Field(ge=0)
    f_score: float = Field(ge=0, le=1)
    threshold: float = Field(gt=0)
    n_pred: int = 0
    n_gt: int = 0
    normalization: str = "none"
    scaled: Optional[Dict[str, float]] = None
    total_loss: Optional[Dict[str, float]] = None


class PipelineSummary(_Strict):
    n_points: int
    n_edges: int
    components: int
    m_anchors: int
    unreachable_anchor_pairs: int
    coverage: MetricReportDocument
    sheet_purity: Optional[float] = None
    sheet_purity_geodesic: Optional[float] = None
    sheet_purity_euclidean: Optional[float] = None
    shortcut_edges: Optional[int] = None


class PipelineDocument(_Strict):
    config: PipelineConfig
    levels: List[GroupedLevelDocument]
    metrics: PipelineSummary


class AnchorTimingDocument(_Strict):
    m_anchors: int
    build_ms: float = Field(gt=0)
    mean_query_us: float = Field(gt=0)
    total_ms: float = Field(gt=0)
    mean_abs_rel_error_vs_oracle: float = Field(ge=0)
    samples: Dict[str, List[float]]


class BenchReportDocument(_Strict):
    n_points: int
    anchor_counts: List[int]
    results: List[AnchorTimingDocument]
    environment: str
    settings: Dict[str, Union[int, str, None]]
    ordering: Dict[str, bool]


SCHEMAS: Dict[str, Type[BaseModel]] = {
    "pipeline-config": PipelineConfig,
    "mlp-params": MlpParamsModel,
    "graph": GraphDocument,
    "engine": EngineDocument,
    "geodesic": GeodesicPairsDocument,
    "sample": SampleDocument,
    "pipeline": PipelineDocument,
    "metrics": MetricReportDocument,
    "bench": BenchReportDocument,
}
