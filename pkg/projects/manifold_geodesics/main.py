#!/usr/bin/env python3
"""
Command-line front end for the manifold geodesics toolkit.

Every subcommand writes one JSON document to --out or standard output;
progress and diagnostics go to standard error.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 invariant violation.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from .bench import run_anchor_benchmark
from .cloud_core import FORMATS, SYNTHETIC_KINDS, gen_synthetic, load_cloud, save_cloud
from .config import config
from .errors import CloudIOError, ManifoldError, ValidationError, check_index
from .geodesic import LEG_METRICS, build_engine, shortest_path_rows
from .log import configure_logging
from .metrics import evaluate, total_loss
from .pipeline import load_pipeline_config, parse_pipeline_config, run_pipeline, source_cloud
from .sampling_graph import build_knn_graph
from .schemas import SCHEMAS

console = Console(stderr=True)


# ==================== Helpers ====================

def _emit(document: Dict, out: Optional[str]) -> None:
    text = json.dumps(document, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CloudIOError(str(e), out)
    console.print(f"[green]✓[/green] wrote {out}")


def _int_list(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of integers, got '{raw}'")


def _parse_pairs(tokens: Sequence[str], n: int) -> Optional[List[Tuple[int, int]]]:
    """'all' -> None (every i < j); otherwise 'i,j' tokens."""
    if len(tokens) == 1 and tokens[0] == "all":
        return None
    pairs = []
    for token in tokens:
        parts = token.split(",")
        if len(parts) != 2:
            raise ValidationError(f"pair '{token}' must look like i,j")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"pair '{token}' must contain integers")
        pairs.append((check_index("i", i, n), check_index("j", j, n)))
    return pairs


def _parse_params(tokens: Sequence[str]) -> Dict[str, float]:
    params = {}
    for token in tokens or []:
        key, sep, value = token.partition("=")
        if not sep:
            raise ValidationError(f"generator parameter '{token}' must look like key=value")
        try:
            params[key] = float(value)
        except ValueError:
            raise ValidationError(f"generator parameter '{key}' must be numeric")
    return params


def _dist(value: float):
    return "inf" if np.isinf(value) else float(value)


# ==================== Subcommands ====================

def cmd_graph(args: argparse.Namespace) -> int:
    cloud = load_cloud(args.input, args.format)
    graph = build_knn_graph(cloud, args.k_graph)
    _emit(graph.to_dict(), args.out)
    return 0


def cmd_geodesic(args: argparse.Namespace) -> int:
    cloud = load_cloud(args.input, args.format)
    graph = build_knn_graph(cloud, args.k_graph)
    m = cloud.n if args.m_anchors is None else args.m_anchors
    engine = build_engine(cloud, graph, m, args.leg_metric, s=args.s, fps_seed=args.fps_seed)

    pairs = _parse_pairs(args.pairs, cloud.n)
    if pairs is None:
        matrix = engine.pairwise()
        pairs = [(i, j) for i in range(cloud.n) for j in range(i + 1, cloud.n)]
        approx = [matrix[i, j] for i, j in pairs]
    else:
        approx = [engine.approx(i, j) for i, j in pairs]

    rows = [[i, j, _dist(d)] for (i, j), d in zip(pairs, approx)]
    if args.oracle and pairs:
        sources = sorted({i for i, _ in pairs})
        exact = shortest_path_rows(graph, sources)
        position = {s: r for r, s in enumerate(sources)}
        for row, (i, j) in zip(rows, pairs):
            row.append(_dist(exact[position[i], j]))

    document = {
        "pairs": rows,
        "settings": {
            "k_graph": args.k_graph,
            "m_anchors": engine.m,
            "leg_metric": engine.leg_metric,
            "s": engine.s,
            "fps_seed": args.fps_seed,
            "oracle": bool(args.oracle),
        },
    }
    if args.dump_engine:
        _emit(engine.to_dict(), args.dump_engine)
    _emit(document, args.out)
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    if args.config:
        cfg = load_pipeline_config(args.config)
    elif args.preset:
        cfg = load_pipeline_config(config.preset_path(args.preset))
    else:
        cfg = parse_pipeline_config({})

    if args.input:
        cloud, meta = load_cloud(args.input, args.format), None
    else:
        cloud, meta = source_cloud(cfg)

    document = run_pipeline(cloud, meta, cfg)
    summary = document["metrics"]
    if summary.get("sheet_purity") is not None:
        console.print(f"sheet purity: {summary['sheet_purity']:.4f}")
    _emit(document, args.out)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    pred = load_cloud(args.pred, args.format)
    gt = load_cloud(args.gt, args.format)
    report = evaluate(pred, gt, args.threshold, normalization=args.normalization)
    if args.scale:
        report.with_scale(args.scale, args.l1_scale)
    document = report.to_dict()
    if args.stage:
        stages = [load_cloud(path, args.format) for path in args.stage]
        document["total_loss"] = {
            variant: total_loss(pred, stages, gt, variant) for variant in ("l1", "l2")
        }
    _emit(document, args.out)
    return 0


def cmd_bench_anchors(args: argparse.Namespace) -> int:
    report = run_anchor_benchmark(
        n=args.n,
        anchor_counts=_int_list(args.anchors),
        trials=args.trials,
        queries=args.queries,
        kind=args.kind,
        k_graph=args.k_graph,
        leg_metric=args.leg_metric,
        s=args.s,
        seed=args.seed,
        n_jobs=args.parallel,
    )

    table = Table(title=f"Anchor scaling (N={report.n_points})")
    for column in ("M", "build ms", "query us", "total ms", "rel. error"):
        table.add_column(column, justify="right")
    for row in report.results:
        table.add_row(
            str(row.m_anchors),
            f"{row.build_ms:.2f}",
            f"{row.mean_query_us:.1f}",
            f"{row.total_ms:.2f}",
            f"{row.mean_abs_rel_error_vs_oracle:.3g}",
        )
    console.print(table)
    _emit(report.to_dict(), args.out)
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    cloud, meta = gen_synthetic(args.kind, args.n, _parse_params(args.param), args.seed)
    save_cloud(cloud, args.out, args.format)
    document = {
        "kind": args.kind,
        "n": cloud.n,
        "seed": args.seed,
        "params": meta.params,
        "path": str(args.out),
        "feature_width": cloud.feature_width,
    }
    if meta.ground_truth_part_id is not None:
        document["part_ids"] = meta.ground_truth_part_id.tolist()
    _emit(document, args.meta)
    return 0


def cmd_schema(args: argparse.Namespace) -> int:
    _emit(SCHEMAS[args.name].model_json_schema(), args.out)
    return 0


# ==================== Parser ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manifold_geodesics",
        description="Anchor-based geodesics and manifold-aware features for point clouds",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    def cloud_input(p, required=True):
        p.add_argument("--input", "-i", required=required, help="Cloud file (.xyz or .ply)")
        p.add_argument("--format", choices=FORMATS, help="Override the format inferred from the suffix")

    p = sub.add_parser("graph", help="Build the Euclidean k-NN proximity graph")
    cloud_input(p)
    p.add_argument("--k-graph", type=int, default=config.K_GRAPH)
    p.add_argument("--out", "-o")
    p.set_defaults(handler=cmd_graph)

    p = sub.add_parser("geodesic", help="Approximate (and optionally exact) geodesics for point pairs")
    cloud_input(p)
    p.add_argument("--k-graph", type=int, default=config.K_GRAPH)
    p.add_argument(
        "--m-anchors",
        type=int,
        default=None,
        help="Anchor count (default: every point). Together with --pairs all this costs about "
        "O(N^3) and is slow for N in the thousands; set --m-anchors or --s to bound it",
    )
    p.add_argument("--leg-metric", choices=LEG_METRICS, default=config.LEG_METRIC)
    p.add_argument("--s", type=int, default=None, help="Candidate anchors per endpoint (default: all)")
    p.add_argument("--fps-seed", type=int, default=config.FPS_SEED)
    p.add_argument("--pairs", nargs="+", default=["all"], help="'all' or pairs like 0,5 3,7")
    p.add_argument("--oracle", action="store_true", help="Append exact graph geodesics")
    p.add_argument("--dump-engine", help="Also write the anchor set and matrix to this path")
    p.add_argument("--out", "-o")
    p.set_defaults(handler=cmd_geodesic)

    p = sub.add_parser("pipeline", help="Grouping, attention and positional embedding")
    cloud_input(p, required=False)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--config", "-c", help="Pipeline config (.json, .yaml)")
    group.add_argument("--preset", help="Name of a shipped preset under configs/")
    p.add_argument("--out", "-o")
    p.set_defaults(handler=cmd_pipeline)

    p = sub.add_parser("metrics", help="Chamfer distances and F-score between two clouds")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--threshold", type=float, default=config.FSCORE_THRESHOLD)
    p.add_argument("--scale", type=float, help="Also report CD-L2 multiplied by this factor")
    p.add_argument("--l1-scale", type=float, default=1e3, help="Factor for CD-L1 when --scale is set")
    p.add_argument("--stage", action="append", help="Refinement stage cloud; adds the multi-stage loss")
    p.add_argument("--normalization", default="none", help="Free-text note on how the clouds were normalized")
    p.add_argument("--out", "-o")
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("bench-anchors", help="Anchor-count scaling benchmark")
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--anchors", default=",".join(str(m) for m in config.BENCH_ANCHORS))
    p.add_argument("--trials", type=int, default=config.BENCH_TRIALS)
    p.add_argument("--queries", type=int, default=config.BENCH_QUERIES)
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, default="swiss_roll")
    p.add_argument("--k-graph", type=int, default=config.K_GRAPH)
    p.add_argument("--leg-metric", choices=LEG_METRICS, default="graph")
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--seed", type=int, default=config.SEED)
    p.add_argument("--parallel", type=int, default=1, help="Threads for engine builds")
    p.add_argument("--out", "-o")
    p.set_defaults(handler=cmd_bench_anchors)

    p = sub.add_parser("gen", help="Write a synthetic cloud")
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--param", action="append", help="Generator parameter key=value")
    p.add_argument("--seed", type=int, default=config.SEED)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", "-o", required=True, help="Cloud file to write")
    p.add_argument("--meta", help="Write the generator metadata JSON here instead of stdout")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("schema", help="Print the JSON Schema of a document")
    p.add_argument("name", choices=sorted(SCHEMAS))
    p.add_argument("--out", "-o")
    p.set_defaults(handler=cmd_schema)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    level = "DEBUG" if args.verbose else "WARNING" if args.quiet else None
    configure_logging(level, force=True)

    try:
        return args.handler(args)
    except ManifoldError as e:
        console.print(f"[red]✗ Error:[/red] {escape(str(e))}", highlight=False, soft_wrap=True)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
