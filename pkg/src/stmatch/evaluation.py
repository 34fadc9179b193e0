"""Ground-truth-free evaluation of matched paths and variant comparison."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Mapping, Optional, Sequence

from .errors import UsageError
from .geometry import distance
from .network import RoadNetwork
from .stats import paired_t_test, welch_t_test
from .trajectory import Trajectory

METRICS = (
    "e1_runtime_s",
    "e2_avg_candidates",
    "e3_total_candidates",
    "q1_avg_projection_m",
    "q2_length_metric",
    "q3_complexity_ratio",
    "t1_revisited_edges",
    "t2_revisited_streets",
    "t3_loops",
    "s1_speed_rel_dev",
)


@dataclass
class TrajectoryMetrics:
    e1_runtime_s: float
    e2_avg_candidates: float
    e3_total_candidates: int
    q1_avg_projection_m: float
    q2_length_metric: Optional[float]
    q3_complexity_ratio: Optional[float]
    t1_revisited_edges: int
    t2_revisited_streets: int
    t3_loops: int
    s1_speed_rel_dev: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)


def count_revisited_edges(edge_ids: Sequence[str]) -> int:
    """Distinct edges used more than once."""
    return sum(1 for c in Counter(edge_ids).values() if c > 1)


def _street_key(network: RoadNetwork, eid: str) -> str:
    name = network.edges[eid].street_name
    return f"name:{name}" if name else f"edge:{eid}"


def count_revisited_streets(edge_ids: Sequence[str], network: RoadNetwork) -> int:
    """Streets entered again after leaving them (two or more separate runs).

    Unnamed edges each form their own street.
    """
    runs = Counter()
    prev = None
    for eid in edge_ids:
        key = _street_key(network, eid)
        if key != prev:
            runs[key] += 1
            prev = key
    return sum(1 for c in runs.values() if c >= 2)


def node_sequence(edge_ids: Sequence[str], network: RoadNetwork) -> list[str]:
    if not edge_ids:
        return []
    nodes = [network.edges[edge_ids[0]].from_node]
    nodes.extend(network.edges[eid].to_node for eid in edge_ids)
    return nodes


def count_loops_in_nodes(nodes: Sequence[str]) -> int:
    """Count cycles by loop erasure: when a node recurs, the loop since its
    earlier visit is counted once and erased from the walk.
    """
    stack: list[str] = []
    where: dict[str, int] = {}
    loops = 0
    for n in nodes:
        if n in where:
            loops += 1
            cut = where[n] + 1
            for dropped in stack[cut:]:
                del where[dropped]
            del stack[cut:]
        else:
            where[n] = len(stack)
            stack.append(n)
    return loops


def count_loops(edge_ids: Sequence[str], network: RoadNetwork) -> int:
    return count_loops_in_nodes(node_sequence(edge_ids, network))


def compute_metrics(trajectory: Trajectory, result, network: RoadNetwork) -> TrajectoryMetrics:
    """All ten measures for one matched trajectory.

    Network distances are the per-transition path lengths of ``result``.
    Undefined ratios (zero denominators) are None.
    """
    pts = trajectory.points
    n = len(pts)
    e3 = sum(result.layer_sizes)
    q1 = sum(c.dist_to_gps_m for c in result.chosen) / n
    sum_e = sum(distance(a.xy, b.xy) for a, b in zip(pts, pts[1:]))
    sum_n = sum(tr.path.length_m for tr in result.per_transition)
    direct = distance(pts[0].xy, pts[-1].xy)
    path_len = result.path.length_m
    elapsed = trajectory.duration()
    edge_ids = result.path.edge_ids
    return TrajectoryMetrics(
        e1_runtime_s=result.runtime_s,
        e2_avg_candidates=e3 / n,
        e3_total_candidates=e3,
        q1_avg_projection_m=q1,
        q2_length_metric=sum_e / sum_n if sum_n > 0 else None,
        q3_complexity_ratio=sum_n / direct if direct > 0 else None,
        t1_revisited_edges=count_revisited_edges(edge_ids),
        t2_revisited_streets=count_revisited_streets(edge_ids, network),
        t3_loops=count_loops(edge_ids, network),
        # sample and path speeds share the elapsed time, which cancels
        s1_speed_rel_dev=abs(sum_e - path_len) / sum_e if elapsed > 0 and sum_e > 0 else None,
    )


def _edges_of(r) -> tuple[str, ...]:
    path = getattr(r, "path", None)
    return tuple(path.edge_ids) if path is not None else tuple(r.edge_ids)


EQUAL, A_CLOSER, B_CLOSER = "equal", "a_closer", "b_closer"


def edge_overlap_compare(result_a, result_b, reference) -> str:
    """Which of two results shares more distinct edges with ``reference``.

    Results pair through ``source_id`` so a low-frequency variant can be
    compared against the match of its original trajectory.
    """
    ids = {result_a.source_id, result_b.source_id, reference.source_id}
    if len(ids) != 1:
        raise UsageError(f"results belong to different trajectories: {sorted(ids)}")
    ref = set(_edges_of(reference))
    oa = len(set(_edges_of(result_a)) & ref)
    ob = len(set(_edges_of(result_b)) & ref)
    if oa == ob:
        return EQUAL
    return A_CLOSER if oa > ob else B_CLOSER


@dataclass
class OverlapTable:
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def percentages(self) -> dict[str, float]:
        total = self.total
        return {k: (100.0 * v / total if total else 0.0) for k, v in self.counts.items()}


def overlap_table(classes: Iterable[str]) -> OverlapTable:
    counts = {EQUAL: 0, A_CLOSER: 0, B_CLOSER: 0}
    for c in classes:
        counts[c] += 1
    return OverlapTable(counts)


@dataclass
class MetricComparison:
    metric: str
    mean_a: Optional[float]
    mean_b: Optional[float]
    t: Optional[float]
    p: Optional[float]
    n_pairs: int
    n_missing: int


@dataclass
class ComparisonReport:
    label_a: str
    label_b: str
    metrics: list[MetricComparison]
    only_in_a: list[str]
    only_in_b: list[str]
    long_rows: list[tuple[str, str, str, Optional[float]]] = field(default_factory=list)
    overlap: Optional[OverlapTable] = None

    def metric(self, name: str) -> MetricComparison:
        for m in self.metrics:
            if m.metric == name:
                return m
        raise KeyError(name)


def _value(m, name):
    if isinstance(m, Mapping):
        return m.get(name)
    return getattr(m, name)


def aggregate_report(metrics_a: Mapping[str, object], metrics_b: Mapping[str, object], label_a: str = "A",
                     label_b: str = "B", paired: bool = False) -> ComparisonReport:
    """Per-metric means and t-tests over trajectories matched by both variants.

    Missing values are excluded pairwise and counted per metric.
    """
    shared = sorted(set(metrics_a) & set(metrics_b))
    if not shared:
        raise UsageError("the two result sets share no trajectory")
    rows = []
    long_rows = []
    for tid in shared:
        for name in METRICS:
            long_rows.append((tid, label_a, name, _value(metrics_a[tid], name)))
            long_rows.append((tid, label_b, name, _value(metrics_b[tid], name)))
    for name in METRICS:
        xs, ys = [], []
        for tid in shared:
            x, y = _value(metrics_a[tid], name), _value(metrics_b[tid], name)
            if x is None or y is None:
                continue
            xs.append(float(x))
            ys.append(float(y))
        t = p = None
        if len(xs) >= 2:
            res = paired_t_test(xs, ys) if paired else welch_t_test(xs, ys)
            t, p = res.t, res.p
        rows.append(MetricComparison(
            metric=name,
            mean_a=sum(xs) / len(xs) if xs else None,
            mean_b=sum(ys) / len(ys) if ys else None,
            t=t,
            p=p,
            n_pairs=len(xs),
            n_missing=len(shared) - len(xs),
        ))
    return ComparisonReport(
        label_a=label_a,
        label_b=label_b,
        metrics=rows,
        only_in_a=sorted(set(metrics_a) - set(metrics_b)),
        only_in_b=sorted(set(metrics_b) - set(metrics_a)),
        long_rows=long_rows,
    )


def metric_field_names() -> list[str]:
    return [f.name for f in fields(TrajectoryMetrics)]
