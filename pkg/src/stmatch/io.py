"""Result, metric and report files written by the command line tool.

Floats go through ``repr`` so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .evaluation import METRICS, ComparisonReport, OverlapTable, TrajectoryMetrics
from .matcher import MatchResult
from .network import RoadNetwork

NULL = "null"

SUMMARY_COLUMNS = ["trajectory_id", "source_id", "variant", "total_score", "runtime_s", "n_points",
                   "total_candidates"]
PATH_COLUMNS = ["trajectory_id", "source_id", "variant", "edge_ids"]
METRIC_COLUMNS = ["trajectory_id", "source_id", "variant", *METRICS]
FAILURE_COLUMNS = ["trajectory_id", "variant", "reason", "gps_index", "layer_pair"]


def _fmt(value) -> str:
    if value is None:
        return NULL
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _open_writer(path, header_lines: Iterable[str]):
    fh = open(path, "w", newline="", encoding="utf-8")
    for line in header_lines:
        fh.write(f"# {line}\n")
    return fh, csv.writer(fh, lineterminator="\n")


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        yield from csv.DictReader(line for line in fh if not line.startswith("#"))


def write_summary(path, results: Iterable[MatchResult], header_lines: Iterable[str] = ()) -> None:
    fh, w = _open_writer(path, header_lines)
    with fh:
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow([r.trajectory_id, r.source_id, r.variant, _fmt(r.total_score), _fmt(r.runtime_s),
                        len(r.chosen), r.total_candidates])


def write_paths(path, results: Iterable[MatchResult], header_lines: Iterable[str] = ()) -> None:
    fh, w = _open_writer(path, header_lines)
    with fh:
        w.writerow(PATH_COLUMNS)
        for r in results:
            w.writerow([r.trajectory_id, r.source_id, r.variant, " ".join(r.path.edge_ids)])


@dataclass(frozen=True)
class StoredPath:
    """A matched path read back from a path file."""

    trajectory_id: str
    source_id: str
    variant: str
    edge_ids: tuple[str, ...]


def read_paths(path) -> dict[str, StoredPath]:
    out = {}
    for row in _rows(path):
        sp = StoredPath(row["trajectory_id"], row["source_id"] or row["trajectory_id"], row["variant"],
                        tuple(row["edge_ids"].split()))
        out[sp.trajectory_id] = sp
    return out


def write_metrics(path, rows: Iterable[tuple[MatchResult, TrajectoryMetrics]],
                  header_lines: Iterable[str] = ()) -> None:
    fh, w = _open_writer(path, header_lines)
    with fh:
        w.writerow(METRIC_COLUMNS)
        for r, m in rows:
            w.writerow([r.trajectory_id, r.source_id, r.variant] + [_fmt(getattr(m, name)) for name in METRICS])


def _parse_value(text: str) -> Optional[float]:
    if text == NULL or text == "":
        return None
    v = float(text)
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def read_metrics(path) -> dict[str, dict[str, Optional[float]]]:
    """Metrics keyed by trajectory id; null markers come back as None."""
    out = {}
    for row in _rows(path):
        out[row["trajectory_id"]] = {name: _parse_value(row[name]) for name in METRICS}
    return out


def write_failures(path, failures: Iterable[tuple], header_lines: Iterable[str] = ()) -> None:
    """Rows of ``(trajectory_id, variant, reason, gps_index, layer_pair)``."""
    fh, w = _open_writer(path, header_lines)
    with fh:
        w.writerow(FAILURE_COLUMNS)
        for tid, variant, reason, gps_index, pair in failures:
            w.writerow([tid, variant, reason, "" if gps_index is None else gps_index,
                        "" if pair is None else f"{pair[0]}-{pair[1]}"])


def path_coordinates(result: MatchResult, network: RoadNetwork) -> list[tuple[float, float]]:
    """Planar polyline of the matched path, clipped to the entry and exit positions."""
    edge_ids = result.path.edge_ids
    coords: list[tuple[float, float]] = []

    def add(pt):
        if not coords or coords[-1] != tuple(pt):
            coords.append(tuple(pt))

    for k, eid in enumerate(edge_ids):
        e = network.edges[eid]
        start = result.path.entry.offset_m if k == 0 else 0.0
        end = result.path.exit.offset_m if k == len(edge_ids) - 1 else e.length_m
        add(e.point_at(start))
        for pt, c in zip(e.geometry, e.cum):
            if start < c < end:
                add(pt)
        add(e.point_at(end))
    return coords


def write_geojson(path, results: Iterable[MatchResult], network: RoadNetwork) -> None:
    """FeatureCollection of matched LineStrings; lon/lat when the network is geographic."""
    proj = network.projection
    features = []
    for r in results:
        coords = path_coordinates(r, network)
        if proj is not None:
            coords = [list(reversed(proj.inverse(x, y))) for x, y in coords]
        else:
            coords = [list(c) for c in coords]
        if len(coords) == 1:
            coords = coords * 2
        features.append({
            "type": "Feature",
            "properties": {"trajectory_id": r.trajectory_id, "source_id": r.source_id, "variant": r.variant,
                           "edge_ids": list(r.path.edge_ids)},
            "geometry": {"type": "LineString", "coordinates": coords},
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, indent=1)
        fh.write("\n")


def _report_float(v) -> str:
    if v is None:
        return NULL
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def write_report(path, report: ComparisonReport, header_lines: Iterable[str] = ()) -> None:
    fh, w = _open_writer(path, [f"a={report.label_a} b={report.label_b}", *header_lines])
    with fh:
        w.writerow(["metric", "mean_a", "mean_b", "t", "p", "n_pairs", "n_missing"])
        for m in report.metrics:
            w.writerow([m.metric, _report_float(m.mean_a), _report_float(m.mean_b), _report_float(m.t),
                        _report_float(m.p), m.n_pairs, m.n_missing])


def write_long_rows(path, report: ComparisonReport) -> None:
    fh, w = _open_writer(path, ())
    with fh:
        w.writerow(["trajectory_id", "variant", "metric", "value"])
        for tid, variant, metric, value in report.long_rows:
            w.writerow([tid, variant, metric, _fmt(value)])


def write_overlap(path, table: OverlapTable, label_a: str, label_b: str, reference_label: str) -> None:
    fh, w = _open_writer(path, [f"a={label_a} b={label_b} reference={reference_label}"])
    with fh:
        w.writerow(["classification", "count", "percentage"])
        pct = table.percentages
        for key, count in table.counts.items():
            w.writerow([key, count, f"{pct[key]:.2f}"])
        w.writerow(["total", table.total, f"{sum(pct.values()):.2f}" if table.total else "0.00"])
