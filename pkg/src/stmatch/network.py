"""Directed road network: loading, spatial queries and on-edge shortest paths."""

from __future__ import annotations

import csv
import heapq
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import count
from pathlib import Path
from typing import Iterable, Optional

from .errors import NetworkFormatError, NetworkStructureError, UnreachableError
from .geometry import (
    LocalProjection,
    Point,
    cumulative_lengths,
    distance,
    parse_linestring,
    point_at_offset,
    project_to_polyline,
    segment_bbox_distance,
)

log = logging.getLogger(__name__)

LENGTH_RTOL = 0.005
ENDPOINT_TOL_M = 1.0


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float

    @property
    def xy(self) -> Point:
        return (self.x, self.y)


@dataclass(eq=False)
class Edge:
    id: str
    from_node: str
    to_node: str
    geometry: tuple[Point, ...]
    length_m: float = 0.0
    street_name: Optional[str] = None
    highway_class: str = "unclassified"
    speed_limit_kmh: Optional[float] = None
    maxspeed_raw: str = ""
    usage_count: int = 0
    usage_score_norm: float = 0.0
    cum: list[float] = field(init=False, repr=False)
    bbox: tuple[float, float, float, float] = field(init=False, repr=False)

    def __post_init__(self):
        self.geometry = tuple((float(x), float(y)) for x, y in self.geometry)
        if len(self.geometry) < 2:
            raise NetworkFormatError(f"edge {self.id}: geometry needs at least 2 points")
        self.cum = cumulative_lengths(self.geometry)
        if any(b <= a for a, b in zip(self.cum, self.cum[1:])):
            raise NetworkFormatError(f"edge {self.id}: geometry has a zero-length segment")
        xs = [p[0] for p in self.geometry]
        ys = [p[1] for p in self.geometry]
        self.bbox = (min(xs), min(ys), max(xs), max(ys))
        if not self.length_m:
            self.length_m = self.cum[-1]

    def point_at(self, offset_m: float) -> Point:
        return point_at_offset(self.geometry, self.cum, offset_m)


@dataclass(frozen=True)
class OnEdgePosition:
    edge_id: str
    offset_m: float
    point: Point


@dataclass(frozen=True)
class NetworkPath:
    edge_ids: tuple[str, ...]
    entry: OnEdgePosition
    exit: OnEdgePosition
    length_m: float


def project_point_to_edge(point: Point, edge: Edge) -> tuple[OnEdgePosition, float]:
    """Closest position on ``edge`` to ``point`` and the distance to it.

    Projections falling beyond the polyline ends are clamped to the nearer
    endpoint.
    """
    offset, q, d = project_to_polyline(point, edge.geometry, edge.cum)
    return OnEdgePosition(edge.id, offset, q), d


class GridIndex:
    """Uniform grid over edge segments for disk queries."""

    def __init__(self, edges: Iterable[Edge], cell_size: float = 100.0):
        self.cell_size = float(cell_size)
        self.cells: dict[tuple[int, int], set[str]] = defaultdict(set)
        for e in edges:
            for a, b in zip(e.geometry, e.geometry[1:]):
                for key in self._cells_for_box(min(a[0], b[0]), min(a[1], b[1]), max(a[0], b[0]), max(a[1], b[1])):
                    self.cells[key].add(e.id)

    def _cells_for_box(self, minx, miny, maxx, maxy):
        c = self.cell_size
        for i in range(math.floor(minx / c), math.floor(maxx / c) + 1):
            for j in range(math.floor(miny / c), math.floor(maxy / c) + 1):
                yield (i, j)

    def candidates(self, center: Point, r: float) -> set[str]:
        found: set[str] = set()
        x, y = center
        for key in self._cells_for_box(x - r, y - r, x + r, y + r):
            bucket = self.cells.get(key)
            if bucket:
                found |= bucket
        return found


class RoadNetwork:
    """Directed multigraph with planar edge geometries.

    Treated as immutable once loaded and imputed; the only mutation after
    construction is speed imputation and attaching usage scores.
    """

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge], projection: Optional[LocalProjection] = None,
                 cell_size: float = 100.0):
        self.projection = projection
        self.nodes: dict[str, Node] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise NetworkFormatError(f"duplicate node id {n.id!r}")
            if not (math.isfinite(n.x) and math.isfinite(n.y)):
                raise NetworkFormatError(f"node {n.id!r} has non-finite coordinates")
            self.nodes[n.id] = n
        self.edges: dict[str, Edge] = {}
        self.out_adjacency: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for e in edges:
            if e.id in self.edges:
                raise NetworkFormatError(f"duplicate edge id {e.id!r}")
            for ref in (e.from_node, e.to_node):
                if ref not in self.nodes:
                    raise NetworkStructureError(f"edge {e.id!r} references missing node {ref!r}")
            for end, nid in ((e.geometry[0], e.from_node), (e.geometry[-1], e.to_node)):
                if distance(end, self.nodes[nid].xy) > ENDPOINT_TOL_M:
                    raise NetworkFormatError(f"edge {e.id!r}: geometry does not end at node {nid!r}")
            if e.length_m <= 0 or not math.isfinite(e.length_m):
                raise NetworkFormatError(f"edge {e.id!r}: length must be positive")
            self.edges[e.id] = e
            self.out_adjacency[e.from_node].append(e.id)
        self.index = GridIndex(self.edges.values(), cell_size)
        # shrink the straight-line heuristic so no edge is shorter than it claims
        ratio = 1.0
        for e in self.edges.values():
            chord = distance(self.nodes[e.from_node].xy, self.nodes[e.to_node].xy)
            if chord > 0:
                ratio = min(ratio, e.length_m / chord)
        self.heuristic_scale = ratio * (1.0 - 1e-12)

    def __repr__(self):
        return f"RoadNetwork({len(self.nodes)} nodes, {len(self.edges)} edges)"

    # spatial queries

    def candidates_within(self, center: Point, r: float) -> list[tuple[float, str, OnEdgePosition]]:
        """``(distance, edge id, projection)`` for every edge within ``r``, nearest first."""
        out = []
        for eid in self.index.candidates(center, r):
            e = self.edges[eid]
            if segment_bbox_distance(center, e.bbox) > r:
                continue
            pos, d = project_point_to_edge(center, e)
            if d <= r:
                out.append((d, eid, pos))
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    def edges_within_radius(self, center: Point, r: float) -> list[str]:
        if r <= 0:
            raise ValueError("radius must be positive")
        return [eid for _, eid, _ in self.candidates_within(center, r)]

    def position(self, edge_id: str, offset_m: float) -> OnEdgePosition:
        e = self.edges[edge_id]
        offset_m = min(max(offset_m, 0.0), e.length_m)
        return OnEdgePosition(edge_id, offset_m, e.point_at(offset_m))

    # routing

    def node_route(self, source: str, target: str) -> Optional[tuple[float, tuple[str, ...]]]:
        """A* between two nodes weighted by edge length.

        The straight-line heuristic is scaled so that no edge is shorter
        than the scaled chord between its end nodes, which keeps it
        consistent.
        """
        if source == target:
            return 0.0, ()
        nodes = self.nodes
        edges = self.edges
        adj = self.out_adjacency
        tx, ty = nodes[target].xy
        h = self.heuristic_scale
        g = {source: 0.0}
        back: dict[str, str] = {}
        closed = set()
        tie = count()
        sx, sy = nodes[source].xy
        heap = [(h * math.hypot(tx - sx, ty - sy), next(tie), 0.0, source)]
        while heap:
            _, _, gu, u = heapq.heappop(heap)
            if u in closed:
                continue
            if u == target:
                path = []
                while u != source:
                    eid = back[u]
                    path.append(eid)
                    u = edges[eid].from_node
                path.reverse()
                return gu, tuple(path)
            closed.add(u)
            for eid in adj[u]:
                e = edges[eid]
                v = e.to_node
                if v in closed:
                    continue
                gv = gu + e.length_m
                if gv < g.get(v, math.inf):
                    g[v] = gv
                    back[v] = eid
                    vx, vy = nodes[v].xy
                    heapq.heappush(heap, (gv + h * math.hypot(tx - vx, ty - vy), next(tie), gv, v))
        return None

    def shortest_path(self, source: OnEdgePosition, target: OnEdgePosition,
                      cache: Optional[dict] = None) -> NetworkPath:
        """Length-minimal directed path between two on-edge positions.

        Length is the residual of the source edge, plus the node-to-node
        distance, plus the offset on the target edge. A forward move along a
        single edge short-circuits to the along-edge distance.
        """
        if source.edge_id == target.edge_id and target.offset_m >= source.offset_m:
            return NetworkPath((source.edge_id,), source, target, target.offset_m - source.offset_m)
        e_from = self.edges[source.edge_id]
        e_to = self.edges[target.edge_id]
        key = (e_from.to_node, e_to.from_node)
        if cache is not None and key in cache:
            route = cache[key]
        else:
            route = self.node_route(*key)
            if cache is not None:
                cache[key] = route
        if route is None:
            raise UnreachableError(f"no path from {source.edge_id} to {target.edge_id}")
        d, mid = route
        length = (e_from.length_m - source.offset_m) + d + target.offset_m
        edge_ids = (source.edge_id,) + mid + (target.edge_id,)
        # a position sitting on a node is re-expressed on the edge actually
        # traversed, so untraversed edges never enter the path's edge set
        if source.offset_m >= e_from.length_m and len(edge_ids) > 1:
            edge_ids = edge_ids[1:]
            source = OnEdgePosition(edge_ids[0], 0.0, self.edges[edge_ids[0]].geometry[0])
        if target.offset_m <= 0.0 and len(edge_ids) > 1:
            edge_ids = edge_ids[:-1]
            last = self.edges[edge_ids[-1]]
            target = OnEdgePosition(last.id, last.length_m, last.geometry[-1])
        return NetworkPath(edge_ids, source, target, length)


def _read_rows(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def _float(value, what: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise NetworkFormatError(f"{what}: not a number: {value!r}") from None
    if not math.isfinite(v):
        raise NetworkFormatError(f"{what}: not finite: {value!r}")
    return v


def load_network(nodes_path, edges_path, mode: str = "planar", cell_size: float = 100.0) -> RoadNetwork:
    """Read a network from a nodes file and an edges file.

    ``mode="geographic"`` reads ``id,lat,lon`` nodes and lon/lat WKT, and
    projects everything to a local planar frame about the node centroid.
    """
    if mode not in ("planar", "geographic"):
        raise ValueError(f"unknown coordinate mode {mode!r}")
    raw_nodes = []
    for lineno, row in _read_rows(Path(nodes_path)):
        where = f"{nodes_path}:{lineno}"
        if mode == "planar":
            raw_nodes.append((row["id"], _float(row.get("x"), where), _float(row.get("y"), where)))
        else:
            raw_nodes.append((row["id"], _float(row.get("lat"), where), _float(row.get("lon"), where)))

    projection = None
    if mode == "geographic":
        projection = LocalProjection.about_centroid((a, b) for _, a, b in raw_nodes)
        nodes = [Node(nid, *projection.forward(lat, lon)) for nid, lat, lon in raw_nodes]
    else:
        nodes = [Node(nid, x, y) for nid, x, y in raw_nodes]

    edges = []
    for lineno, row in _read_rows(Path(edges_path)):
        eid = row["id"]
        where = f"{edges_path}:{lineno} (edge {eid})"
        try:
            coords = parse_linestring(row.get("geometry") or "")
        except ValueError as exc:
            raise NetworkFormatError(f"{where}: {exc}") from None
        if len(coords) < 2:
            raise NetworkFormatError(f"{where}: empty geometry")
        if projection is not None:
            coords = [projection.forward(lat, lon) for lon, lat in coords]
        edge = Edge(
            id=eid,
            from_node=row["from"],
            to_node=row["to"],
            geometry=tuple(coords),
            street_name=(row.get("street_name") or "").strip() or None,
            highway_class=(row.get("highway") or "").strip() or "unclassified",
            maxspeed_raw=(row.get("maxspeed") or "").strip(),
        )
        if (row.get("usage_count") or "").strip():
            edge.usage_count = int(row["usage_count"])
            edge.usage_score_norm = _float(row.get("usage_score_norm") or 0.0, where)
        declared = (row.get("length_m") or "").strip()
        if declared:
            declared_m = _float(declared, where)
            if abs(declared_m - edge.length_m) > LENGTH_RTOL * edge.length_m:
                raise NetworkFormatError(
                    f"{where}: length_m {declared_m} disagrees with geometry length {edge.length_m:.3f}")
        edges.append(edge)
    network = RoadNetwork(nodes, edges, projection, cell_size)
    log.info("loaded %r", network)
    return network


def write_network(network: RoadNetwork, nodes_path, edges_path, with_usage: bool = False) -> None:
    """Write a network in the file layout accepted by ``load_network``.

    Networks loaded from geographic files are written back as lat/lon.
    """
    proj = network.projection
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "lat", "lon"] if proj else ["id", "x", "y"])
        for n in network.nodes.values():
            a, b = proj.inverse(n.x, n.y) if proj else (n.x, n.y)
            w.writerow([n.id, repr(a), repr(b)])
    cols = ["id", "from", "to", "length_m", "street_name", "highway", "maxspeed", "geometry"]
    if with_usage:
        cols += ["usage_count", "usage_score_norm"]
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for e in network.edges.values():
            maxspeed = e.maxspeed_raw if e.speed_limit_kmh is None else f"{e.speed_limit_kmh:g}"
            pts = e.geometry
            if proj:
                pts = [tuple(reversed(proj.inverse(x, y))) for x, y in pts]
            geom = "LINESTRING(" + ", ".join(f"{x!r} {y!r}" for x, y in pts) + ")"
            row = [e.id, e.from_node, e.to_node, repr(e.length_m), e.street_name or "", e.highway_class, maxspeed, geom]
            if with_usage:
                row += [e.usage_count, repr(e.usage_score_norm)]
            w.writerow(row)


def network_stats(network: RoadNetwork) -> dict:
    import networkx as nx

    g = nx.MultiDiGraph()
    g.add_nodes_from(network.nodes)
    g.add_edges_from((e.from_node, e.to_node) for e in network.edges.values())
    n, m = g.number_of_nodes(), g.number_of_edges()
    stats = {
        "nodes": n,
        "edges": m,
        "avg_degree": 2 * m / n if n else 0.0,
        "avg_out_degree": m / n if n else 0.0,
        "density": m / (n * (n - 1)) if n > 1 else 0.0,
        "mean_edge_length_m": sum(e.length_m for e in network.edges.values()) / m if m else 0.0,
    }
    if n:
        scc = max(nx.strongly_connected_components(g), key=len)
        sub = nx.DiGraph(g.subgraph(scc))
        stats["largest_scc_nodes"] = len(scc)
        stats["hop_diameter_largest_scc"] = nx.diameter(sub) if len(scc) > 1 else 0
    return stats
