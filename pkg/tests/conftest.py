import pytest

from stmatch.evaluation import METRICS
from stmatch.network import Edge, Node, RoadNetwork
from stmatch.speeds import impute_speed_limits
from stmatch.synthetic import make_grid_city
from stmatch.trajectory import GpsPoint, Trajectory


def edge(eid, a, b, coords, **kw):
    kw.setdefault("maxspeed_raw", "50")
    return Edge(id=eid, from_node=a, to_node=b, geometry=tuple(coords), **kw)


def square_network(side=100.0, both_ways=True) -> RoadNetwork:
    """Four corners a(0,0) b(side,0) c(side,side) d(0,side), counter-clockwise ring plus the reverse ring."""
    pos = {"a": (0.0, 0.0), "b": (side, 0.0), "c": (side, side), "d": (0.0, side)}
    nodes = [Node(k, *v) for k, v in pos.items()]
    ring = ["a", "b", "c", "d", "a"]
    edges = []
    for u, v in zip(ring, ring[1:]):
        edges.append(edge(f"{u}{v}", u, v, [pos[u], pos[v]], street_name=f"{min(u, v)}{max(u, v)} street"))
        if both_ways:
            edges.append(edge(f"{v}{u}", v, u, [pos[v], pos[u]], street_name=f"{min(u, v)}{max(u, v)} street"))
    net = RoadNetwork(nodes, edges)
    impute_speed_limits(net)
    return net


def straight_street(n_edges=5, spacing=100.0, name="Main", maxspeed="50") -> RoadNetwork:
    """One-way street along the x axis: s0 -> s1 -> ... with edges e0, e1, ..."""
    nodes = [Node(f"s{i}", i * spacing, 0.0) for i in range(n_edges + 1)]
    edges = [edge(f"e{i}", f"s{i}", f"s{i + 1}", [(i * spacing, 0.0), ((i + 1) * spacing, 0.0)],
                  street_name=name, maxspeed_raw=maxspeed) for i in range(n_edges)]
    net = RoadNetwork(nodes, edges)
    impute_speed_limits(net)
    return net


def trajectory(tid, xy_t, uncertainty=10.0, source_id=None) -> Trajectory:
    return Trajectory(tid, tuple(GpsPoint(x, y, t, uncertainty) for x, y, t in xy_t), source_id)


def write_result_dir(d, variant, paths, ids=None):
    """A result directory as written by ``match``, holding the given ``source -> edges`` paths.

    Metric values are arbitrary but vary between rows. ``ids`` overrides the
    trajectory ids, which otherwise equal the source ids.
    """
    d.mkdir(parents=True)
    ids = ids or list(paths)
    with open(d / "paths.csv", "w", encoding="utf-8") as fh:
        fh.write("trajectory_id,source_id,variant,edge_ids\n")
        for tid, (src, edges) in zip(ids, paths.items()):
            fh.write(f"{tid},{src},{variant},{' '.join(edges)}\n")
    with open(d / "metrics.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(["trajectory_id", "source_id", "variant", *METRICS]) + "\n")
        for k, (tid, src) in enumerate(zip(ids, paths)):
            fh.write(",".join([tid, src, variant] + [str(k + len(paths[src]))] * len(METRICS)) + "\n")
    return d


@pytest.fixture(scope="session")
def grid_city():
    return make_grid_city()


@pytest.fixture
def square():
    return square_network()
