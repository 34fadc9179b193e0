"""GPS trajectories: loading, preprocessing filters and low-frequency resampling."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ConfigError, TrajectoryFormatError
from .geometry import LocalProjection, Point, distance, parse_polygon, point_in_polygon

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GpsPoint:
    x: float
    y: float
    t: float
    uncertainty_m: float = 0.0

    @property
    def xy(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class Trajectory:
    id: str
    points: tuple[GpsPoint, ...]
    source_id: Optional[str] = None

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError(f"trajectory {self.id}: needs at least 2 points")
        for a, b in zip(self.points, self.points[1:]):
            if not b.t > a.t:
                raise ValueError(f"trajectory {self.id}: timestamps must strictly increase")

    @property
    def origin_id(self) -> str:
        """Id of the trajectory this one was derived from (itself if original)."""
        return self.source_id or self.id

    def __len__(self):
        return len(self.points)

    def path_length(self) -> float:
        return sum(distance(a.xy, b.xy) for a, b in zip(self.points, self.points[1:]))

    def duration(self) -> float:
        return self.points[-1].t - self.points[0].t


def parse_timestamp(value: str) -> float:
    """Epoch seconds from an integer/float string or an ISO-8601 timestamp."""
    value = value.strip()
    try:
        return float(value)
    except ValueError:
        pass
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_trajectories(path, mode: str = "planar", projection: Optional[LocalProjection] = None,
                      warnings: Optional[Counter] = None) -> list[Trajectory]:
    """Read a trajectory table, grouping rows by id and ordering by time.

    Rows repeating a timestamp within one id keep the first occurrence.
    Geographic input needs the network's ``projection`` so both share one
    planar frame; without it a projection about the points' centroid is used.
    Dropped rows and trajectories are tallied into ``warnings``.
    """
    if mode not in ("planar", "geographic"):
        raise ValueError(f"unknown coordinate mode {mode!r}")
    warnings = Counter() if warnings is None else warnings
    rows: dict[str, list[tuple[float, int, float, float, float]]] = defaultdict(list)
    sources: dict[str, str] = {}
    a_col, b_col = ("x", "y") if mode == "planar" else ("lat", "lon")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for lineno, row in enumerate(reader, start=2):
            try:
                tid = row["trajectory_id"].strip()
                a = float(row[a_col])
                b = float(row[b_col])
                unc = float(row.get("uncertainty") or 0.0)
                t = parse_timestamp(row["timestamp"])
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                raise TrajectoryFormatError(f"{path}:{lineno}: malformed row ({exc})") from None
            if not tid or not all(math.isfinite(v) for v in (a, b, unc, t)) or unc < 0:
                raise TrajectoryFormatError(f"{path}:{lineno}: malformed row")
            rows[tid].append((t, lineno, a, b, unc))
            src = (row.get("source_id") or "").strip()
            if src:
                sources[tid] = src

    if mode == "geographic" and projection is None:
        projection = LocalProjection.about_centroid((r[2], r[3]) for rs in rows.values() for r in rs)

    out = []
    for tid in sorted(rows):
        recs = sorted(rows[tid])
        pts = []
        last_t = None
        for t, _, a, b, unc in recs:
            if t == last_t:
                warnings["duplicate_timestamp"] += 1
                continue
            last_t = t
            x, y = (a, b) if mode == "planar" else projection.forward(a, b)
            pts.append(GpsPoint(x, y, t, unc))
        if len(pts) < 2:
            warnings["too_few_points"] += 1
            continue
        out.append(Trajectory(tid, tuple(pts), sources.get(tid)))
    if warnings:
        log.warning("trajectory load warnings: %s", dict(warnings))
    return out


def write_trajectories(path, trajectories: Iterable[Trajectory], projection: Optional[LocalProjection] = None,
                       header_comment: Optional[str] = None) -> None:
    """Write trajectories back out; lat/lon columns when ``projection`` is given."""
    trajectories = list(trajectories)
    with_source = any(t.source_id for t in trajectories)
    cols = ["trajectory_id"] + (["lat", "lon"] if projection else ["x", "y"]) + ["uncertainty", "timestamp"]
    if with_source:
        cols.append("source_id")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for tr in trajectories:
            for p in tr.points:
                a, b = projection.inverse(p.x, p.y) if projection else (p.x, p.y)
                row = [tr.id, repr(a), repr(b), repr(p.uncertainty_m), repr(p.t)]
                if with_source:
                    row.append(tr.source_id or "")
                w.writerow(row)


def load_polygon(path, mode: str = "planar", projection: Optional[LocalProjection] = None) -> list[list[Point]]:
    text = Path(path).read_text(encoding="utf-8").strip()
    try:
        rings = parse_polygon(text)
    except ValueError as exc:
        raise TrajectoryFormatError(f"{path}: {exc}") from None
    if mode == "geographic":
        if projection is None:
            raise ConfigError("geographic polygon needs a projection")
        rings = [[projection.forward(lat, lon) for lon, lat in ring] for ring in rings]
    return rings


def _ring_points(ring: Sequence[Point]) -> list[Point]:
    ring = list(ring)
    if len(ring) > 1 and ring[0] == ring[-1]:
        ring = ring[:-1]
    return ring


def filter_by_polygon(trajectories: Iterable[Trajectory], polygon,
                      warnings: Optional[Counter] = None) -> list[Trajectory]:
    """Drop points outside ``polygon`` (a ring, or a list of rings with holes)."""
    rings = polygon if polygon and isinstance(polygon[0][0], (tuple, list)) else [polygon]
    rings = [_ring_points(r) for r in rings]
    if len(rings[0]) < 3:
        raise ConfigError("polygon needs at least 3 distinct vertices")
    out = []
    for tr in trajectories:
        kept = tuple(p for p in tr.points if point_in_polygon(p.xy, rings))
        if len(kept) == len(tr.points):
            out.append(tr)
        elif len(kept) >= 2:
            out.append(replace(tr, points=kept))
        elif warnings is not None:
            warnings["polygon_too_few_points"] += 1
    return out


def filter_min_points(trajectories: Iterable[Trajectory], n_min: int = 10) -> list[Trajectory]:
    if n_min < 2:
        raise ConfigError("n_min must be at least 2")
    return [tr for tr in trajectories if len(tr.points) >= n_min]


def average_speed_kmh(tr: Trajectory) -> float:
    """Sum of straight hops between consecutive points over elapsed time."""
    return 3.6 * tr.path_length() / tr.duration()


def filter_min_avg_speed(trajectories: Iterable[Trajectory], v_min_kmh: float = 6.0,
                         warnings: Optional[Counter] = None) -> list[Trajectory]:
    if v_min_kmh <= 0:
        raise ConfigError("v_min_kmh must be positive")
    out = []
    for tr in trajectories:
        if tr.duration() <= 0:
            if warnings is not None:
                warnings["zero_duration"] += 1
            continue
        # tolerate rounding at the boundary, e.g. 100 m in 60 s is 6 km/h
        if average_speed_kmh(tr) >= v_min_kmh * (1 - 1e-12):
            out.append(tr)
    return out


def downsample_low_frequency(tr: Trajectory, min_interval_s: float = 120.0,
                             warnings: Optional[Counter] = None) -> Optional[Trajectory]:
    """Greedy thinning: keep the first point, then each point at least
    ``min_interval_s`` after the last kept one. None when fewer than 2 remain.
    """
    if min_interval_s <= 0:
        raise ConfigError("min_interval_s must be positive")
    kept = [tr.points[0]]
    for p in tr.points[1:]:
        if p.t - kept[-1].t >= min_interval_s:
            kept.append(p)
    if len(kept) < 2:
        if warnings is not None:
            warnings["downsample_too_few_points"] += 1
        return None
    return Trajectory(f"{tr.id}#lf{min_interval_s:g}", tuple(kept), tr.origin_id)


def preprocess(trajectories: Iterable[Trajectory], polygon=None, n_min: int = 10, v_min_kmh: float = 6.0,
               warnings: Optional[Counter] = None) -> tuple[list[Trajectory], dict[str, int]]:
    """Canonical pipeline: polygon clip, then minimum points, then minimum speed.

    Clipping first can shorten a trajectory below ``n_min`` or change its
    average speed, so the order matters.
    """
    trajs = list(trajectories)
    removed = {"input": len(trajs)}
    if polygon is not None:
        before = len(trajs)
        trajs = filter_by_polygon(trajs, polygon, warnings)
        removed["polygon"] = before - len(trajs)
    before = len(trajs)
    trajs = filter_min_points(trajs, n_min)
    removed["min_points"] = before - len(trajs)
    before = len(trajs)
    trajs = filter_min_avg_speed(trajs, v_min_kmh, warnings)
    removed["min_speed"] = before - len(trajs)
    removed["output"] = len(trajs)
    return trajs, removed


def trajectory_stats(trajectories: Iterable[Trajectory]) -> dict:
    trajs = list(trajectories)
    gaps = [b.t - a.t for tr in trajs for a, b in zip(tr.points, tr.points[1:])]
    n_points = sum(len(tr.points) for tr in trajs)
    return {
        "trajectories": len(trajs),
        "points": n_points,
        "mean_points_per_trajectory": n_points / len(trajs) if trajs else 0.0,
        "mean_sampling_interval_s": sum(gaps) / len(gaps) if gaps else 0.0,
    }
