"""Candidate graph construction, trellis decoding and path reconstruction."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .behavioral import EdgeUsageScores, behavioral_score
from .candidates import Candidate, CandidateLayer, MatchConfig, prepare_candidates
from .errors import ConfigError, MatchFailure, UnreachableError
from .geometry import distance
from .network import NetworkPath, RoadNetwork
from .scoring import (
    MODIFIED,
    ST,
    STB,
    mean_speed_limit,
    observation_probability,
    speed_penalty,
    speed_variation_penalty,
    temporal_cosine,
    transition_score,
    transmission_score,
    travel_time_penalty,
)
from .trajectory import Trajectory


@dataclass(slots=True)
class Transition:
    """Scored link from candidate ``t`` of layer ``layer - 1`` to candidate ``s`` of ``layer``."""

    layer: int
    t: int
    s: int
    path: NetworkPath
    observation: float
    transmission: float
    f_spatial: float
    f_temporal: float
    p_tt: Optional[float] = None
    p_s: Optional[float] = None
    p_sv: Optional[float] = None
    f_behavioral: Optional[float] = None
    f_total: float = 0.0


@dataclass
class CandidateGraph:
    """Trellis over candidate layers.

    ``transitions[k]`` is the ``len(layers[k]) x len(layers[k+1])`` table of
    links into layer ``k+1``; an entry is None when infeasible.
    """

    layers: list[CandidateLayer]
    transitions: list[list[list[Optional[Transition]]]]
    initial_scores: list[float]

    def weight_tables(self) -> list[list[list[Optional[float]]]]:
        return [[[None if tr is None else tr.f_total for tr in row] for row in table] for table in self.transitions]


@dataclass
class MatchResult:
    trajectory_id: str
    source_id: str
    variant: str
    chosen: tuple[Candidate, ...]
    path: NetworkPath
    per_transition: tuple[Transition, ...]
    total_score: float
    runtime_s: float
    layer_sizes: tuple[int, ...]

    @property
    def total_candidates(self) -> int:
        return sum(self.layer_sizes)


def _speed_limits(network: RoadNetwork, path: NetworkPath) -> list[float]:
    limits = []
    for eid in path.edge_ids:
        v = network.edges[eid].speed_limit_kmh
        if v is None:
            raise ConfigError(f"edge {eid} has no speed limit; run speed imputation first")
        limits.append(v)
    return limits


def score_transition(cfg: MatchConfig, network: RoadNetwork, layer_index: int, t: int, s: int, target: Candidate,
                     target_layer: CandidateLayer, path: NetworkPath, euclid_m: float, dt_s: float,
                     edge_scores: Optional[EdgeUsageScores] = None) -> Transition:
    obs = observation_probability(target.dist_to_gps_m, target_layer.sigma_used_m, cfg.observation_normalization)
    dn = path.length_m
    degenerate = dn == 0.0
    trans = transmission_score(euclid_m, dn)
    limits = _speed_limits(network, path)
    v_avg_ms = euclid_m / dt_s
    v_avg_kmh = 3.6 * v_avg_ms
    tr = Transition(layer_index, t, s, path, obs, trans, obs * trans, 1.0)
    if cfg.variant == ST:
        # the cosine ignores magnitude, so any positive speed stands in for a stationary one
        tr.f_temporal = 1.0 if degenerate else temporal_cosine(limits, v_avg_kmh if v_avg_kmh > 0 else 1.0)
        tr.f_total = transition_score(ST, obs, trans, cosine=tr.f_temporal)
        return tr

    if degenerate:
        p_tt = p_s = p_sv = 1.0
    else:
        v_lim = mean_speed_limit(limits)
        if cfg.travel_time_estimate == "speed_limit":
            p_tt = travel_time_penalty(dt_s, dn / (v_lim / 3.6))
        elif v_avg_ms > 0:
            p_tt = travel_time_penalty(dt_s, dn / v_avg_ms)
        else:
            # the points did not move but the path does: infinite estimated time
            p_tt = 0.0
        p_s = speed_penalty(v_avg_kmh, v_lim) if v_avg_kmh > 0 else 1.0
        p_sv = speed_variation_penalty(limits, cfg.dispersion)
    tr.p_tt, tr.p_s, tr.p_sv = p_tt, p_s, p_sv
    tr.f_temporal = p_tt * p_s * p_sv
    if cfg.variant == MODIFIED:
        tr.f_total = transition_score(MODIFIED, obs, trans, p_tt=p_tt, p_s=p_s, p_sv=p_sv)
    else:
        if edge_scores is None:
            raise ConfigError("STB matching needs edge usage scores")
        tr.f_behavioral = behavioral_score(path, edge_scores)
        tr.f_total = transition_score(STB, obs, trans, p_tt=p_tt, p_s=p_s, p_sv=p_sv, behavioral=tr.f_behavioral)
    return tr


def build_candidate_graph(trajectory: Trajectory, network: RoadNetwork, cfg: MatchConfig,
                          edge_scores: Optional[EdgeUsageScores] = None) -> CandidateGraph:
    if cfg.variant == STB and edge_scores is None:
        raise ConfigError("STB matching needs edge usage scores")
    points = trajectory.points
    layers = []
    for i, p in enumerate(points):
        layer = prepare_candidates(p, network, cfg, i)
        if not layer.candidates:
            raise MatchFailure(f"trajectory {trajectory.id}: no candidate for point {i}", gps_index=i)
        layers.append(layer)

    initial = [observation_probability(c.dist_to_gps_m, layers[0].sigma_used_m, cfg.observation_normalization)
               for c in layers[0].candidates]
    cache: dict = {}
    tables = []
    for i in range(1, len(points)):
        prev, cur = points[i - 1], points[i]
        dt = cur.t - prev.t
        de = distance(prev.xy, cur.xy)
        table = []
        feasible = False
        for t, cp in enumerate(layers[i - 1].candidates):
            row = []
            for s, cc in enumerate(layers[i].candidates):
                tr = None
                if dt > 0:
                    try:
                        path = network.shortest_path(cp.position, cc.position, cache)
                    except UnreachableError:
                        path = None
                    if path is not None:
                        tr = score_transition(cfg, network, i, t, s, cc, layers[i], path, de, dt, edge_scores)
                        feasible = True
                row.append(tr)
            table.append(row)
        if not feasible:
            raise MatchFailure(f"trajectory {trajectory.id}: no feasible transition between points {i - 1} and {i}",
                               layer_pair=(i - 1, i))
        tables.append(table)
    return CandidateGraph(layers, tables, initial)


def decode_trellis(initial: Sequence[float],
                   tables: Sequence[Sequence[Sequence[Optional[float]]]]) -> tuple[list[int], float]:
    """Maximum-sum chain through a layered graph.

    ``initial[s]`` seeds layer 0; ``tables[k][t][s]`` weights the link from
    ``t`` in layer ``k`` to ``s`` in layer ``k+1`` (None = no link). Ties go
    to the smaller index, resolved from the last layer backward.
    """
    score = list(initial)
    back = []
    for k, table in enumerate(tables):
        m_next = len(table[0]) if table else 0
        nxt = [-math.inf] * m_next
        arg = [-1] * m_next
        for s in range(m_next):
            best, best_t = -math.inf, -1
            for t, row in enumerate(table):
                w = row[s]
                if w is None or score[t] == -math.inf:
                    continue
                v = score[t] + w
                if v > best:
                    best, best_t = v, t
            nxt[s], arg[s] = best, best_t
        if all(v == -math.inf for v in nxt):
            raise MatchFailure(f"no feasible chain reaches layer {k + 1}", layer_pair=(k, k + 1))
        score = nxt
        back.append(arg)
    best_s = max(range(len(score)), key=lambda s: (score[s], -s))
    chain = [best_s]
    for arg in reversed(back):
        chain.append(arg[chain[-1]])
    chain.reverse()
    return chain, score[best_s]


def find_best_path(graph: CandidateGraph) -> list[int]:
    return decode_trellis(graph.initial_scores, graph.weight_tables())[0]


def concat_paths(paths: Sequence[NetworkPath]) -> NetworkPath:
    """Join consecutive transition paths, merging the shared edge at each junction."""
    edge_ids = list(paths[0].edge_ids)
    for p in paths[1:]:
        ids = p.edge_ids
        if edge_ids and ids and ids[0] == edge_ids[-1]:
            ids = ids[1:]
        edge_ids.extend(ids)
    return NetworkPath(tuple(edge_ids), paths[0].entry, paths[-1].exit, sum(p.length_m for p in paths))


def match_trajectory(trajectory: Trajectory, network: RoadNetwork, cfg: MatchConfig,
                     edge_scores: Optional[EdgeUsageScores] = None) -> MatchResult:
    """Match one trajectory; raises MatchFailure rather than returning a partial result."""
    start = time.perf_counter()
    graph = build_candidate_graph(trajectory, network, cfg, edge_scores)
    chain, total = decode_trellis(graph.initial_scores, graph.weight_tables())
    chosen = tuple(layer.candidates[s] for layer, s in zip(graph.layers, chain))
    per_transition = tuple(graph.transitions[k][chain[k]][chain[k + 1]] for k in range(len(chain) - 1))
    path = concat_paths([tr.path for tr in per_transition])
    runtime = time.perf_counter() - start
    return MatchResult(
        trajectory_id=trajectory.id,
        source_id=trajectory.origin_id,
        variant=cfg.variant,
        chosen=chosen,
        path=path,
        per_transition=per_transition,
        total_score=total,
        runtime_s=runtime,
        layer_sizes=tuple(len(layer) for layer in graph.layers),
    )
