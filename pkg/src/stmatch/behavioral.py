"""Historical edge-usage scores and the path behavioral score."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .candidates import MatchConfig, prepare_candidates_dynamic
from .network import NetworkPath, RoadNetwork
from .trajectory import Trajectory

log = logging.getLogger(__name__)


@dataclass
class EdgeUsageScores:
    raw: dict[str, int]
    normalized: dict[str, float] = field(default_factory=dict)
    unknown_edge_hits: int = 0

    @property
    def max_raw(self) -> int:
        return max(self.raw.values(), default=0)

    def merged(self, other: "EdgeUsageScores") -> "EdgeUsageScores":
        raw = Counter(self.raw)
        raw.update(other.raw)
        return EdgeUsageScores(dict(raw))


def accumulate_edge_usage(training: Iterable[Trajectory], network: RoadNetwork, cfg: Optional[MatchConfig] = None,
                          mode: str = "candidates") -> EdgeUsageScores:
    """Count how often each edge hosts a candidate over a historical set.

    Every candidate of every point counts, not only the best one. With
    ``mode="matched"`` each trajectory is matched with ModifiedST instead and
    only the edges of the matched path are counted.
    """
    cfg = cfg or MatchConfig(variant="ModifiedST")
    raw = Counter({eid: 0 for eid in network.edges})
    n = 0
    for tr in training:
        n += 1
        if mode == "candidates":
            for i, p in enumerate(tr.points):
                layer = prepare_candidates_dynamic(p, network, cfg, i)
                for c in layer.candidates:
                    raw[c.edge_id] += 1
        elif mode == "matched":
            from .errors import MatchFailure
            from .matcher import match_trajectory

            try:
                result = match_trajectory(tr, network, MatchConfig(**{**cfg.to_dict(), "variant": "ModifiedST"}))
            except MatchFailure:
                continue
            raw.update(result.path.edge_ids)
        else:
            raise ValueError(f"unknown accumulation mode {mode!r}")
    if n == 0:
        log.warning("empty training set: all edge scores are zero")
    return EdgeUsageScores(dict(raw))


def normalize_edge_scores(scores: EdgeUsageScores) -> EdgeUsageScores:
    """Log-scale raw counts into [0, 1]; the busiest edge gets exactly 1."""
    top = scores.max_raw
    if top <= 0:
        norm = {eid: 0.0 for eid in scores.raw}
    else:
        denom = math.log(top + 1)
        norm = {eid: (1.0 if c == top else math.log(c + 1) / denom) for eid, c in scores.raw.items()}
    return EdgeUsageScores(dict(scores.raw), norm, scores.unknown_edge_hits)


def behavioral_score(path: NetworkPath, scores: EdgeUsageScores) -> float:
    """Mean normalized usage over the path's edges; unknown edges count as 0."""
    edge_ids = path.edge_ids or (path.entry.edge_id,)
    total = 0.0
    for eid in edge_ids:
        v = scores.normalized.get(eid)
        if v is None:
            scores.unknown_edge_hits += 1
            continue
        total += v
    return total / len(edge_ids)


def attach_to_network(network: RoadNetwork, scores: EdgeUsageScores) -> None:
    for eid, e in network.edges.items():
        e.usage_count = scores.raw.get(eid, 0)
        e.usage_score_norm = scores.normalized.get(eid, 0.0)


def write_edge_scores(path, scores: EdgeUsageScores, header_comment: Optional[str] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "raw_count", "normalized"])
        for eid in sorted(scores.raw):
            w.writerow([eid, scores.raw[eid], repr(scores.normalized.get(eid, 0.0))])


def read_edge_scores(path) -> EdgeUsageScores:
    raw, norm = {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            raw[row["edge_id"]] = int(row["raw_count"])
            norm[row["edge_id"]] = float(row["normalized"])
    return EdgeUsageScores(raw, norm)
