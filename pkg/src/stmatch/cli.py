"""Command line pipeline: preprocess, downsample, train-scores, match, compare, network-stats.

Exit codes: 0 success, 1 some trajectories or outputs failed, 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import io
from .behavioral import (
    EdgeUsageScores,
    accumulate_edge_usage,
    attach_to_network,
    normalize_edge_scores,
    read_edge_scores,
    write_edge_scores,
)
from .candidates import MatchConfig, normalize_variant
from .config import RunConfig, from_dict, load_config, validate_inputs, with_overrides
from .errors import ConfigError, MatchFailure, StMatchError, UsageError
from .evaluation import aggregate_report, compute_metrics, edge_overlap_compare, overlap_table
from .geometry import LocalProjection
from .matcher import match_trajectory
from .network import RoadNetwork, load_network, network_stats, write_network
from .scoring import STB
from .speeds import DEFAULT_CLASS_SPEEDS_KMH, impute_speed_limits
from .trajectory import (
    Trajectory,
    downsample_low_frequency,
    load_polygon,
    load_trajectories,
    preprocess,
    trajectory_stats,
    write_trajectories,
)

log = logging.getLogger("stmatch")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def setup_logging() -> None:
    level = os.environ.get("STMATCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load_network(cfg: RunConfig) -> RoadNetwork:
    network = load_network(cfg.nodes, cfg.edges, cfg.mode, cfg.cell_size_m)
    defaults = {**DEFAULT_CLASS_SPEEDS_KMH, **(cfg.speed_defaults or {})}
    report = impute_speed_limits(network, defaults)
    log.info("speed imputation: %s", report)
    return network


def _projection_for(cfg: RunConfig, network: Optional[RoadNetwork]) -> Optional[LocalProjection]:
    """Planar frame shared by all inputs of a geographic run."""
    if cfg.mode != "geographic":
        return None
    if network is not None:
        return network.projection
    with open(cfg.trajectories, newline="", encoding="utf-8") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return LocalProjection.about_centroid((float(r["lat"]), float(r["lon"])) for r in rows)


def _sample(items: list[Trajectory], size: Optional[int], rng: random.Random) -> list[Trajectory]:
    items = sorted(items, key=lambda t: t.id)
    if size is None or size >= len(items):
        return items
    return sorted(rng.sample(items, size), key=lambda t: t.id)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_preprocess(cfg: RunConfig) -> int:
    validate_inputs(cfg, ("trajectories",))
    network = _load_network(cfg) if cfg.nodes and cfg.edges else None
    proj = _projection_for(cfg, network)
    warnings = Counter()
    trajs = load_trajectories(cfg.trajectories, cfg.mode, proj, warnings)
    polygon = load_polygon(cfg.polygon, cfg.mode, proj) if cfg.polygon else None
    kept, removed = preprocess(trajs, polygon, cfg.n_min, cfg.v_min_kmh, warnings)
    kept = _sample(kept, cfg.sample_size, random.Random(cfg.seed))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.output_dir / "preprocessed.csv"
    write_trajectories(out, kept, proj, f"seed={cfg.seed} sample_size={cfg.sample_size}")
    summary = {"removed": removed, "warnings": dict(warnings), "sampled": len(kept), **trajectory_stats(kept)}
    _write_json(cfg.output_dir / "preprocess_stats.json", summary)
    if not kept:
        print("preprocess: no trajectory survived the filters", file=sys.stderr)
        return EXIT_PARTIAL
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_downsample(cfg: RunConfig) -> int:
    validate_inputs(cfg, ("trajectories",))
    proj = _projection_for(cfg, _load_network(cfg) if cfg.nodes and cfg.edges else None)
    warnings = Counter()
    trajs = load_trajectories(cfg.trajectories, cfg.mode, proj, warnings)
    out_trajs = []
    for tr in trajs:
        low = downsample_low_frequency(tr, cfg.min_interval_s, warnings)
        if low is not None:
            out_trajs.append(low)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_trajectories(cfg.output_dir / "lowfreq.csv", out_trajs, proj, f"min_interval_s={cfg.min_interval_s:g}")
    summary = {"input": len(trajs), "output": len(out_trajs), "warnings": dict(warnings)}
    _write_json(cfg.output_dir / "downsample_stats.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_train_scores(cfg: RunConfig) -> int:
    source = cfg.training_trajectories or cfg.trajectories
    if source is None:
        raise ConfigError("train-scores needs 'training_trajectories' (or 'trajectories')")
    validate_inputs(cfg, ("nodes", "edges"))
    network = _load_network(cfg)
    proj = _projection_for(cfg, network)
    training = _sample(load_trajectories(source, cfg.mode, proj), cfg.train_size, random.Random(cfg.seed))
    overlap = 0
    if cfg.evaluation_trajectories is not None:
        eval_ids = {t.origin_id for t in load_trajectories(cfg.evaluation_trajectories, cfg.mode, proj)}
        overlap = sum(1 for t in training if t.origin_id in eval_ids)
        if overlap:
            log.warning("%d training trajectories also appear in the evaluation set", overlap)
    mcfg = cfg.match_config("modified")
    if not mcfg.dynamic:
        mcfg = MatchConfig(variant="ModifiedST")
    scores = normalize_edge_scores(accumulate_edge_usage(training, network, mcfg, cfg.accumulation_mode))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    header = f"seed={cfg.seed} train_size={cfg.train_size} trajectories={len(training)}"
    write_edge_scores(cfg.output_dir / "edge_scores.csv", scores, header)
    attach_to_network(network, scores)
    write_network(network, cfg.output_dir / "network_nodes.csv", cfg.output_dir / "network_edges_scored.csv",
                  with_usage=True)
    summary = {"training_trajectories": len(training), "evaluation_overlap": overlap,
               "max_raw": scores.max_raw, "edges_without_hits": sum(1 for v in scores.raw.values() if v == 0)}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _edge_scores_for(cfg: RunConfig, network: RoadNetwork) -> Optional[EdgeUsageScores]:
    if cfg.edge_scores is not None:
        return read_edge_scores(cfg.edge_scores)
    with open(cfg.edges, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(line for line in fh if not line.startswith("#")), [])
    if "usage_score_norm" in header:
        return EdgeUsageScores({e.id: e.usage_count for e in network.edges.values()},
                               {e.id: e.usage_score_norm for e in network.edges.values()})
    return None


# worker state, set once per process
_STATE: dict = {}


def _init_worker(network, mcfg, scores):
    _STATE.update(network=network, cfg=mcfg, scores=scores)


def _match_one(tr: Trajectory):
    network, mcfg, scores = _STATE["network"], _STATE["cfg"], _STATE["scores"]
    try:
        result = match_trajectory(tr, network, mcfg, scores)
    except MatchFailure as exc:
        return "fail", (tr.id, mcfg.variant, str(exc), exc.gps_index, exc.layer_pair)
    return "ok", (result, compute_metrics(tr, result, network))


def cmd_match(cfg: RunConfig) -> int:
    validate_inputs(cfg, ("nodes", "edges", "trajectories"))
    mcfg = cfg.match_config()
    network = _load_network(cfg)
    scores = None
    if mcfg.variant == STB:
        scores = _edge_scores_for(cfg, network)
        if scores is None:
            raise ConfigError("STB needs 'edge_scores' or a network edges file with usage_score_norm")
    proj = _projection_for(cfg, network)
    trajs = _sample(load_trajectories(cfg.trajectories, cfg.mode, proj), cfg.sample_size, random.Random(cfg.seed))

    if cfg.workers > 1 and len(trajs) > 1:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=(network, mcfg, scores)) as pool:
            outcomes = list(pool.map(_match_one, trajs, chunksize=max(1, len(trajs) // (4 * cfg.workers))))
    else:
        _init_worker(network, mcfg, scores)
        outcomes = [_match_one(tr) for tr in trajs]

    done = sorted((v for k, v in outcomes if k == "ok"), key=lambda rm: rm[0].trajectory_id)
    failed = sorted((v for k, v in outcomes if k == "fail"), key=lambda f: f[0])
    out_dir = cfg.output_dir / mcfg.variant
    out_dir.mkdir(parents=True, exist_ok=True)
    header = [f"variant={mcfg.variant} seed={cfg.seed} sample_size={cfg.sample_size}",
              "config=" + json.dumps(mcfg.to_dict(), sort_keys=True)]
    results = [r for r, _ in done]
    io.write_summary(out_dir / "summary.csv", results, header)
    io.write_paths(out_dir / "paths.csv", results, header)
    io.write_metrics(out_dir / "metrics.csv", done, header)
    io.write_failures(out_dir / "failures.csv", failed, header)
    if cfg.geojson:
        io.write_geojson(out_dir / "matched.geojson", results, network)
    print(json.dumps({"variant": mcfg.variant, "matched": len(done), "failed": len(failed),
                      "output": str(out_dir)}))
    if failed:
        for f in failed:
            print(f"failed {f[0]}: {f[2]}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _result_dir(p: Path, what: str) -> Path:
    if p.is_file():
        p = p.parent
    for name in ("metrics.csv", "paths.csv"):
        if not (p / name).exists():
            raise UsageError(f"{what}: {p} holds no {name}; point it at a directory written by 'match'")
    return p


def _label(d: Path) -> str:
    paths = io.read_paths(d / "paths.csv")
    variants = sorted({sp.variant for sp in paths.values()})
    return variants[0] if len(variants) == 1 else d.name


def cmd_compare(cfg: RunConfig) -> int:
    validate_inputs(cfg, ("results_a", "results_b"))
    dir_a = _result_dir(cfg.results_a, "results_a")
    dir_b = _result_dir(cfg.results_b, "results_b")
    label_a = cfg.label_a or _label(dir_a)
    label_b = cfg.label_b or _label(dir_b)
    if label_a == label_b:
        label_a, label_b = f"{label_a}_a", f"{label_b}_b"
    report = aggregate_report(io.read_metrics(dir_a / "metrics.csv"), io.read_metrics(dir_b / "metrics.csv"),
                              label_a, label_b, cfg.paired)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    io.write_report(cfg.output_dir / "comparison.csv", report,
                    [f"test={'paired' if cfg.paired else 'welch'} only_in_a={len(report.only_in_a)} "
                     f"only_in_b={len(report.only_in_b)}"])
    io.write_long_rows(cfg.output_dir / "comparison_long.csv", report)
    summary = {"shared": report.metrics[0].n_pairs + report.metrics[0].n_missing,
               "only_in_a": len(report.only_in_a), "only_in_b": len(report.only_in_b)}
    if cfg.reference is not None:
        dir_ref = _result_dir(cfg.reference, "reference")
        ref = {sp.source_id: sp for sp in io.read_paths(dir_ref / "paths.csv").values()}
        by_source_a = {sp.source_id: sp for sp in io.read_paths(dir_a / "paths.csv").values()}
        by_source_b = {sp.source_id: sp for sp in io.read_paths(dir_b / "paths.csv").values()}
        shared = sorted(set(by_source_a) & set(by_source_b) & set(ref))
        if not shared:
            raise UsageError("no trajectory is present in both result sets and the reference")
        table = overlap_table(edge_overlap_compare(by_source_a[s], by_source_b[s], ref[s]) for s in shared)
        io.write_overlap(cfg.output_dir / "overlap.csv", table, label_a, label_b, _label(dir_ref))
        summary["overlap"] = {k: round(v, 2) for k, v in table.percentages.items()}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_network_stats(cfg: RunConfig) -> int:
    validate_inputs(cfg, ("nodes", "edges"))
    stats = network_stats(_load_network(cfg))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.output_dir / "network_stats.json", stats)
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "downsample": cmd_downsample,
    "train-scores": cmd_train_scores,
    "match": cmd_match,
    "compare": cmd_compare,
    "network-stats": cmd_network_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--output-dir")
        if name == "match":
            p.add_argument("--variant", choices=["st", "modified", "stb"])
            p.add_argument("--geojson", action="store_true", default=None)
        if name == "compare":
            p.add_argument("--a", dest="results_a", help="result directory of variant A")
            p.add_argument("--b", dest="results_b", help="result directory of variant B")
            p.add_argument("--reference", help="result directory of the reference run for the overlap table")
            p.add_argument("--paired", action="store_true", default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is already our config code
        return int(exc.code or 0)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    for key in ("results_a", "results_b", "reference"):
        if overrides.get(key) is not None:
            overrides[key] = Path(overrides[key])
    if overrides.get("variant") is not None:
        overrides["variant"] = normalize_variant(overrides["variant"])
    try:
        cfg = load_config(args.config) if args.config else from_dict({}, Path.cwd())
        cfg = with_overrides(cfg, **overrides)
        return COMMANDS[args.command](cfg)
    except (StMatchError, OSError) as exc:
        # bad inputs (unreadable or malformed files) are reported like bad configuration
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
