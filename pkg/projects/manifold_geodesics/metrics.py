"""
Completion-quality metrics: Chamfer distance (L1 and L2), F-score and the
multi-stage Chamfer loss.

Conventions (see docs/FORMATS.md):
    CD-L2 = mean_p min_q |p-q|^2 + mean_q min_p |q-p|^2
    CD-L1 = (mean_p min_q |p-q| + mean_q min_p |q-p|) / 2
    F     = 2PR / (P + R), a point matches when its nearest distance < threshold
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .cloud_core import PointCloud
from .config import config
from .errors import EmptyCloudError, ValidationError
from .log import get_logger

logger = get_logger(__name__)

VARIANTS = ("l1", "l2")

# candidates taken from the KD-tree before the exact re-ranking
_KD_CANDIDATES = 4

CloudLike = Union[PointCloud, np.ndarray]


def _positions(cloud: CloudLike, name: str) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.positions
    array = np.asarray(cloud, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != 3:
        raise ValidationError(f"{name} must have shape (N, 3), got {array.shape}")
    if array.shape[0] == 0:
        raise EmptyCloudError(f"{name} has no points")
    return array


def nearest_sq_distances_bruteforce(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Reference O(|source| |target|) squared nearest-neighbor distances."""
    out = np.empty(source.shape[0])
    step = max(1, (1 << 20) // max(1, target.shape[0]))
    for start in range(0, source.shape[0], step):
        diff = source[start:start + step, None, :] - target[None, :, :]
        out[start:start + step] = np.sum(diff * diff, axis=-1).min(axis=1)
    return out


def nearest_sq_distances(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Squared distance from each source point to its nearest target point.

    A KD-tree proposes candidates; their distances are recomputed with the
    same arithmetic as the brute-force reference, so both paths agree
    bit for bit.
    """
    k = min(_KD_CANDIDATES, target.shape[0])
    _, idx = cKDTree(target).query(source, k=k)
    idx = np.asarray(idx).reshape(source.shape[0], k)
    diff = source[:, None, :] - target[idx]
    return np.sum(diff * diff, axis=-1).min(axis=1)


def chamfer(p: CloudLike, q: CloudLike, variant: str = "l2") -> float:
    """Symmetric Chamfer distance.

    Args:
        p: Predicted cloud
        q: Reference cloud
        variant: 'l2' (squared distances, summed directions) or
            'l1' (distances, averaged directions)
    """
    if variant not in VARIANTS:
        raise ValidationError(f"chamfer variant must be one of {VARIANTS}, got '{variant}'")
    pp, qq = _positions(p, "P"), _positions(q, "Q")
    forward = nearest_sq_distances(pp, qq)
    backward = nearest_sq_distances(qq, pp)
    if variant == "l2":
        return float(np.mean(forward) + np.mean(backward))
    return float(0.5 * (np.mean(np.sqrt(forward)) + np.mean(np.sqrt(backward))))


def f_score(p: CloudLike, q: CloudLike, threshold: Optional[float] = None) -> float:
    """Harmonic mean of precision (P near Q) and recall (Q near P)."""
    threshold = config.FSCORE_THRESHOLD if threshold is None else float(threshold)
    if not threshold > 0:
        raise ValidationError(f"F-score threshold must be > 0, got {threshold}")
    pp, qq = _positions(p, "P"), _positions(q, "Q")
    precision = float(np.mean(np.sqrt(nearest_sq_distances(pp, qq)) < threshold))
    recall = float(np.mean(np.sqrt(nearest_sq_distances(qq, pp)) < threshold))
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def total_loss(
    coarse: CloudLike,
    stages: Sequence[CloudLike],
    gt: CloudLike,
    variant: str = "l2",
) -> float:
    """Chamfer of the coarse output plus the Chamfer of every refinement stage."""
    loss = chamfer(coarse, gt, variant)
    for stage in stages:
        loss += chamfer(stage, gt, variant)
    return loss


@dataclass
class MetricReport:
    """Metrics between one predicted and one reference cloud."""

    cd_l1: float
    cd_l2: float
    f_score: float
    threshold: float
    n_pred: int = 0
    n_gt: int = 0
    normalization: str = "none"
    scaled: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        values = (self.cd_l1, self.cd_l2, self.f_score, self.threshold)
        if not all(np.isfinite(v) and v >= 0 for v in values) or self.f_score > 1:
            raise ValidationError(f"metric values out of range: {values}")

    def with_scale(self, l2_scale: float = 1e4, l1_scale: float = 1e3) -> "MetricReport":
        """Attach table-style scaled CD values alongside the raw ones."""
        if not (l2_scale > 0 and l1_scale > 0):
            raise ValidationError(f"scales must be > 0, got {l2_scale}, {l1_scale}")
        self.scaled = {
            "cd_l2_scale": float(l2_scale),
            "cd_l2": self.cd_l2 * l2_scale,
            "cd_l1_scale": float(l1_scale),
            "cd_l1": self.cd_l1 * l1_scale,
        }
        return self

    def to_dict(self) -> Dict:
        data = asdict(self)
        if not self.scaled:
            data.pop("scaled")
        return data


def evaluate(
    pred: CloudLike,
    gt: CloudLike,
    threshold: Optional[float] = None,
    normalization: str = "none",
) -> MetricReport:
    """Compute all metrics for one cloud pair."""
    threshold = config.FSCORE_THRESHOLD if threshold is None else float(threshold)
    report = MetricReport(
        cd_l1=chamfer(pred, gt, "l1"),
        cd_l2=chamfer(pred, gt, "l2"),
        f_score=f_score(pred, gt, threshold),
        threshold=threshold,
        n_pred=int(_positions(pred, "P").shape[0]),
        n_gt=int(_positions(gt, "Q").shape[0]),
        normalization=normalization,
    )
    logger.debug("Metrics: CD-L1=%.6g CD-L2=%.6g F=%.4f", report.cd_l1, report.cd_l2, report.f_score)
    return report
