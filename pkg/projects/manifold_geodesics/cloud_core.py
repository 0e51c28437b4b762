"""
Point cloud representation, file I/O and synthetic manifold generators.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CloudIOError, CloudParseError, EmptyCloudError, ValidationError
from .log import get_logger

logger = get_logger(__name__)

FORMATS = ("xyz", "ply-ascii")
SYNTHETIC_KINDS = ("swiss_roll", "two_planes", "cylinder", "grid")

PathLike = Union[str, Path]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """N points in 3-space with optional per-point feature rows.

    Arrays are stored as read-only float64 copies, so a cloud can be shared
    between readers without copying.
    """

    positions: np.ndarray
    features: Optional[np.ndarray] = None

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        if positions.ndim == 1 and positions.size == 3:
            positions = positions.reshape(1, 3)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValidationError(f"positions must have shape (N, 3), got {positions.shape}")
        if positions.shape[0] == 0:
            raise EmptyCloudError("point cloud has no points")
        if not np.all(np.isfinite(positions)):
            raise ValidationError("positions contain NaN or Inf")
        object.__setattr__(self, "positions", _frozen(positions))

        if self.features is not None:
            features = np.asarray(self.features, dtype=np.float64)
            if features.ndim == 1:
                features = features.reshape(-1, 1)
            if features.ndim != 2 or features.shape[0] != positions.shape[0]:
                raise ValidationError(
                    f"feature rows ({features.shape[0] if features.ndim else 0}) "
                    f"must equal point count ({positions.shape[0]})"
                )
            if not np.all(np.isfinite(features)):
                raise ValidationError("features contain NaN or Inf")
            object.__setattr__(self, "features", _frozen(features))

    @property
    def n(self) -> int:
        return int(self.positions.shape[0])

    @property
    def feature_width(self) -> int:
        return 0 if self.features is None else int(self.features.shape[1])

    def __len__(self) -> int:
        return self.n

    def point_features(self) -> np.ndarray:
        """Per-point input rows for feature extraction: [x, y, z, f...]."""
        if self.features is None:
            return np.array(self.positions)
        return np.hstack([self.positions, self.features])

    def subset(self, indices: Sequence[int]) -> "PointCloud":
        """Cloud restricted to the given indices, in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        features = None if self.features is None else self.features[idx]
        return PointCloud(self.positions[idx], features)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "PointCloud":
        """Rigidly moved copy: x -> R x + t."""
        moved = self.positions @ np.asarray(rotation, dtype=np.float64).T + np.asarray(translation)
        return PointCloud(moved, self.features)


@dataclass(frozen=True, eq=False)
class CloudMeta:
    """Label and optional per-point component tags for a cloud."""

    name: str
    ground_truth_part_id: Optional[np.ndarray] = None
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.ground_truth_part_id is not None:
            tags = np.array(self.ground_truth_part_id, dtype=np.int64, copy=True)
            tags.setflags(write=False)
            object.__setattr__(self, "ground_truth_part_id", tags)

    def check_against(self, cloud: PointCloud) -> None:
        """Raise if the tag array does not match the cloud size."""
        if self.ground_truth_part_id is not None and len(self.ground_truth_part_id) != cloud.n:
            raise ValidationError(
                f"part id array has length {len(self.ground_truth_part_id)}, cloud has {cloud.n} points"
            )


def deduplicate(cloud: PointCloud, decimals: Optional[int] = None) -> Tuple[PointCloud, np.ndarray]:
    """Drop repeated points, keeping the first occurrence.

    Args:
        cloud: Input cloud
        decimals: Round coordinates to this many decimals before comparing

    Returns:
        (deduplicated cloud, kept indices into the input)
    """
    keys = cloud.positions if decimals is None else np.round(cloud.positions, decimals)
    _, first = np.unique(keys, axis=0, return_index=True)
    kept = np.sort(first)
    if len(kept) < cloud.n:
        logger.info("Removed %d duplicate points", cloud.n - len(kept))
    return cloud.subset(kept), kept


# ==================== File I/O ====================

def infer_format(path: PathLike) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return "ply-ascii"
    if suffix in (".xyz", ".txt", ".pts"):
        return "xyz"
    raise ValidationError(f"cannot infer cloud format from suffix '{suffix}'; pass format explicitly")


def _read_text(path: Path) -> str:
    if not path.exists():
        raise CloudIOError("file not found", str(path))
    try:
        # binary payloads decode to junk and then fail the parser with a line number
        return path.read_bytes().decode("utf-8", errors="replace")
    except OSError as e:
        raise CloudIOError(str(e), str(path))


def _parse_xyz(text: str, path: str) -> PointCloud:
    rows: List[List[float]] = []
    width: Optional[int] = None
    for line_no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) < 3:
            raise CloudParseError(f"expected at least 3 columns, found {len(parts)}", path, line_no)
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise CloudParseError(f"expected {width} columns, found {len(parts)}", path, line_no)
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise CloudParseError(f"non-numeric value in '{stripped}'", path, line_no)
        if not all(math.isfinite(v) for v in values):
            raise CloudParseError("non-finite value", path, line_no)
        rows.append(values)

    if not rows:
        raise EmptyCloudError(f"{path}: no points")
    data = np.asarray(rows, dtype=np.float64)
    features = data[:, 3:] if data.shape[1] > 3 else None
    return PointCloud(data[:, :3], features)


def _parse_ply(text: str, path: str) -> PointCloud:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudParseError("missing 'ply' magic", path, 1)

    elements: List[Tuple[str, int, List[str]]] = []
    header_end = None
    for line_no, line in enumerate(lines[1:], 2):
        parts = line.split()
        if not parts:
            continue
        keyword = parts[0]
        if keyword == "format":
            if len(parts) < 2 or parts[1] != "ascii":
                raise CloudParseError("only 'format ascii' PLY files are supported", path, line_no)
        elif keyword in ("comment", "obj_info"):
            continue
        elif keyword == "element":
            if len(parts) != 3:
                raise CloudParseError("malformed element line", path, line_no)
            try:
                elements.append((parts[1], int(parts[2]), []))
            except ValueError:
                raise CloudParseError("element count is not an integer", path, line_no)
        elif keyword == "property":
            if not elements:
                raise CloudParseError("property before any element", path, line_no)
            elements[-1][2].append(parts[-1])
        elif keyword == "end_header":
            header_end = line_no
            break
        else:
            raise CloudParseError(f"unexpected header keyword '{keyword}'", path, line_no)

    if header_end is None:
        raise CloudParseError("missing end_header", path, len(lines))

    body = [(no, ln) for no, ln in enumerate(lines[header_end:], header_end + 1) if ln.strip()]
    cursor = 0
    vertices = None
    names: List[str] = []
    for name, count, props in elements:
        block = body[cursor:cursor + count]
        if len(block) < count:
            last = body[-1][0] if body else header_end
            raise CloudParseError(f"expected {count} '{name}' records, found {len(block)}", path, last)
        cursor += count
        if name != "vertex":
            continue
        for axis in ("x", "y", "z"):
            if axis not in props:
                raise CloudParseError(f"vertex element lacks property '{axis}'", path, header_end)
        rows = []
        for line_no, ln in block:
            parts = ln.split()
            if len(parts) != len(props):
                raise CloudParseError(f"expected {len(props)} values, found {len(parts)}", path, line_no)
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise CloudParseError(f"non-numeric value in '{ln.strip()}'", path, line_no)
        vertices = np.asarray(rows, dtype=np.float64).reshape(count, len(props))
        names = props

    if vertices is None:
        raise CloudParseError("no vertex element declared", path, header_end)
    if vertices.shape[0] == 0:
        raise EmptyCloudError(f"{path}: no points")
    if not np.all(np.isfinite(vertices)):
        raise CloudParseError("non-finite vertex value", path, header_end)

    positions = vertices[:, [names.index("x"), names.index("y"), names.index("z")]]
    extra = [i for i, p in enumerate(names) if p not in ("x", "y", "z")]
    features = vertices[:, extra] if extra else None
    return PointCloud(positions, features)


def load_cloud(path: PathLike, format: Optional[str] = None) -> PointCloud:
    """Load a cloud from an xyz or ply-ascii file.

    Args:
        path: File path
        format: 'xyz' or 'ply-ascii'; inferred from the suffix when omitted

    Returns:
        Parsed PointCloud (features present when extra columns exist)
    """
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt not in FORMATS:
        raise ValidationError(f"unknown cloud format '{fmt}'; expected one of {FORMATS}")
    text = _read_text(path)
    cloud = _parse_xyz(text, str(path)) if fmt == "xyz" else _parse_ply(text, str(path))
    logger.debug("Loaded %d points (%d feature columns) from %s", cloud.n, cloud.feature_width, path)
    return cloud


def _format_row(values: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in values)


def save_cloud(cloud: PointCloud, path: PathLike, format: Optional[str] = None) -> None:
    """Write a cloud as xyz or ply-ascii at full double precision."""
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt not in FORMATS:
        raise ValidationError(f"unknown cloud format '{fmt}'; expected one of {FORMATS}")

    data = cloud.positions if cloud.features is None else np.hstack([cloud.positions, cloud.features])
    body = "\n".join(_format_row(row) for row in data) + "\n"
    if fmt == "ply-ascii":
        header = ["ply", "format ascii 1.0", f"element vertex {cloud.n}"]
        header += [f"property double {axis}" for axis in ("x", "y", "z")]
        header += [f"property double f{c}" for c in range(cloud.feature_width)]
        header.append("end_header")
        body = "\n".join(header) + "\n" + body

    try:
        path.write_text(body, encoding="utf-8")
    except OSError as e:
        raise CloudIOError(str(e), str(path))


# ==================== Synthetic generators ====================

_DEFAULT_PARAMS: Dict[str, Dict[str, float]] = {
    "grid": {"spacing": 1.0, "noise": 0.0},
    "two_planes": {"gap": 0.05, "extent": 1.0, "jitter": 0.0, "noise": 0.0},
    "swiss_roll": {"turns": 1.5, "width": 2.0, "pitch": 0.15, "noise": 0.0},
    "cylinder": {"radius": 1.0, "height": 2.0, "arc": 2.0 * math.pi, "noise": 0.0},
}


def _resolve_params(kind: str, params: Optional[Dict[str, float]]) -> Dict[str, float]:
    resolved = dict(_DEFAULT_PARAMS[kind])
    for key, value in (params or {}).items():
        if key not in resolved:
            raise ValidationError(f"unknown parameter '{key}' for generator '{kind}'")
        resolved[key] = float(value)

    positive = {
        "grid": ["spacing"],
        "two_planes": ["gap", "extent"],
        "swiss_roll": ["width", "pitch"],
        "cylinder": ["radius", "height", "arc"],
    }[kind]
    for key in positive:
        if not resolved[key] > 0:
            raise ValidationError(f"{kind}: parameter '{key}' must be > 0, got {resolved[key]}")
    if resolved["noise"] < 0:
        raise ValidationError(f"{kind}: parameter 'noise' must be >= 0")
    if kind == "swiss_roll" and resolved["turns"] < 1:
        raise ValidationError(f"swiss_roll: parameter 'turns' must be >= 1, got {resolved['turns']}")
    if kind == "cylinder" and resolved["arc"] > 2.0 * math.pi + 1e-12:
        raise ValidationError("cylinder: parameter 'arc' must lie in (0, 2*pi]")
    if kind == "two_planes" and not 0 <= resolved["jitter"] < 0.5:
        raise ValidationError("two_planes: parameter 'jitter' must lie in [0, 0.5)")
    return resolved


def _grid_xy(count: int, spacing: float) -> np.ndarray:
    side = max(1, math.ceil(math.sqrt(count)))
    idx = np.arange(count)
    return np.column_stack([(idx % side) * spacing, (idx // side) * spacing])


def _spiral_arclength(theta: np.ndarray, pitch: float) -> np.ndarray:
    # arclength of r = pitch * theta measured from theta = 0
    return 0.5 * pitch * (theta * np.sqrt(1.0 + theta ** 2) + np.arcsinh(theta))


def gen_synthetic(
    kind: str,
    n: int,
    params: Optional[Dict[str, float]] = None,
    seed: int = 0,
) -> Tuple[PointCloud, CloudMeta]:
    """Generate a synthetic manifold sample.

    Args:
        kind: One of swiss_roll, two_planes, cylinder, grid
        n: Number of points (>= 4)
        params: Per-kind parameters; unspecified ones take defaults
        seed: Seed for every random draw

    Returns:
        (cloud, meta). two_planes tags each point with its sheet (0 or 1);
        swiss_roll carries the spiral arclength as a single feature column.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValidationError(f"unknown generator '{kind}'; expected one of {SYNTHETIC_KINDS}")
    if int(n) < 4:
        raise ValidationError(f"n must be >= 4, got {n}")
    n = int(n)
    p = _resolve_params(kind, params)
    rng = np.random.default_rng(seed)
    features = None
    part_ids = None

    if kind == "grid":
        xy = _grid_xy(n, p["spacing"])
        positions = np.column_stack([xy, np.zeros(n)])

    elif kind == "two_planes":
        lower = n - n // 2
        upper = n // 2
        side = max(2, math.ceil(math.sqrt(lower)))
        spacing = p["extent"] / (side - 1)
        sheets = []
        for sheet, count in enumerate((lower, upper)):
            xy = _grid_xy(count, spacing)
            if p["jitter"] > 0:
                xy = xy + rng.uniform(-p["jitter"], p["jitter"], size=xy.shape) * spacing
            z = np.full(count, sheet * p["gap"])
            sheets.append(np.column_stack([xy, z]))
        positions = np.vstack(sheets)
        part_ids = np.concatenate([np.zeros(lower, dtype=np.int64), np.ones(upper, dtype=np.int64)])

    elif kind == "swiss_roll":
        theta0 = math.pi
        theta = theta0 + 2.0 * math.pi * p["turns"] * rng.uniform(0.0, 1.0, size=n)
        height = rng.uniform(0.0, p["width"], size=n)
        radius = p["pitch"] * theta
        positions = np.column_stack([radius * np.cos(theta), height, radius * np.sin(theta)])
        features = (_spiral_arclength(theta, p["pitch"]) - _spiral_arclength(np.array(theta0), p["pitch"])).reshape(-1, 1)

    else:  # cylinder
        theta = rng.uniform(0.0, p["arc"], size=n)
        z = rng.uniform(0.0, p["height"], size=n)
        positions = np.column_stack([p["radius"] * np.cos(theta), p["radius"] * np.sin(theta), z])

    if p["noise"] > 0:
        positions = positions + rng.normal(0.0, p["noise"], size=positions.shape)

    cloud = PointCloud(positions, features)
    meta = CloudMeta(name=kind, ground_truth_part_id=part_ids, params=p)
    logger.debug("Generated %s with %d points (seed %d)", kind, n, seed)
    return cloud, meta
