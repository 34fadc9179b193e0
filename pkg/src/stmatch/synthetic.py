"""Synthetic grid cities and simulated GPS trajectories with known routes.

Used by the test suite and the acceptance checks, and handy for trying the
CLI without real data.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .network import Edge, Node, RoadNetwork
from .speeds import impute_speed_limits
from .trajectory import GpsPoint, Trajectory


def make_grid_city(n: int = 21, spacing: float = 100.0, arterial_every: int = 5,
                   one_way_residential: bool = True) -> RoadNetwork:
    """``n x n`` grid of intersections.

    Every ``arterial_every``-th row and column is a two-way 50 km/h arterial;
    the streets in between are 30 km/h residential, one-way in alternating
    directions unless ``one_way_residential`` is False.
    """
    nodes = [Node(f"n{i}_{j}", i * spacing, j * spacing) for j in range(n) for i in range(n)]
    edges = []

    def add(eid, a, b, name, arterial):
        (ia, ja), (ib, jb) = a, b
        edges.append(Edge(
            id=eid,
            from_node=f"n{ia}_{ja}",
            to_node=f"n{ib}_{jb}",
            geometry=((ia * spacing, ja * spacing), (ib * spacing, jb * spacing)),
            street_name=name,
            highway_class="secondary" if arterial else "residential",
            maxspeed_raw="50" if arterial else "30",
        ))

    for k in range(n):
        arterial = k % arterial_every == 0
        forward = k % 2 == 0
        for m in range(n - 1):
            # row k runs along x, column k along y
            row, col = f"Row {k}", f"Col {k}"
            if arterial or not one_way_residential or forward:
                add(f"r{k}_{m}f", (m, k), (m + 1, k), row, arterial)
                add(f"c{k}_{m}f", (k, m), (k, m + 1), col, arterial)
            if arterial or not one_way_residential or not forward:
                add(f"r{k}_{m}b", (m + 1, k), (m, k), row, arterial)
                add(f"c{k}_{m}b", (k, m + 1), (k, m), col, arterial)
    network = RoadNetwork(nodes, edges, cell_size=spacing)
    impute_speed_limits(network)
    return network


def random_route(network: RoadNetwork, rng: random.Random, n_edges: tuple[int, int] = (10, 25),
                 run_blocks: tuple[int, int] = (2, 5), attempts: int = 200) -> list[str]:
    """A simple route that never revisits a node or re-enters a street.

    The route follows a street for a random number of blocks before turning,
    so that consecutive samples a block apart are joined by a unique
    shortest path.
    """
    edge_ids = sorted(network.edges)
    for _ in range(attempts):
        target = rng.randint(*n_edges)
        first = network.edges[rng.choice(edge_ids)]
        route = [first.id]
        visited = {first.from_node, first.to_node}
        used_streets = {first.street_name}
        run, run_len = 1, rng.randint(*run_blocks)
        while len(route) < target:
            cur = network.edges[route[-1]]
            options = [network.edges[eid] for eid in network.out_adjacency[cur.to_node]]
            options = [e for e in options if e.to_node not in visited]
            straight = [e for e in options if e.street_name == cur.street_name]
            turns = [e for e in options if e.street_name not in used_streets]
            if run < run_len and straight:
                nxt = straight[0]
                run += 1
            elif turns:
                nxt = rng.choice(sorted(turns, key=lambda e: e.id))
                run, run_len = 1, rng.randint(*run_blocks)
                used_streets.add(nxt.street_name)
            elif straight:
                nxt = straight[0]
                run += 1
            else:
                break
            route.append(nxt.id)
            visited.add(nxt.to_node)
        if len(route) >= n_edges[0]:
            return route
    raise RuntimeError("could not generate a route; network too small?")


@dataclass
class SimulatedTrip:
    trajectory: Trajectory
    route: list[str]
    truth_edges: list[str]


def simulate_trip(network: RoadNetwork, route: list[str], rng: random.Random, traj_id: str,
                  interval_s: float = 10.0, noise_m: float = 0.0, uncertainty: tuple[float, float] = (5.0, 30.0),
                  speed_factor: tuple[float, float] = (0.6, 0.9), t0: float = 1_575_158_400.0) -> SimulatedTrip:
    """Drive ``route`` at a fraction of each edge's limit and sample it.

    Noise is isotropic Gaussian with standard deviation ``noise_m`` per axis.
    ``truth_edges`` is the part of the route between the first and last
    sample.
    """
    factor = rng.uniform(*speed_factor)
    edges = [network.edges[eid] for eid in route]
    first = edges[0]
    s0 = rng.uniform(0.1, 0.9) * first.length_m
    # (edge index, offset) reached at each sampling time
    samples = []
    t = 0.0
    k, offset = 0, s0
    while True:
        samples.append((t, k, offset))
        remaining = interval_s
        while remaining > 0 and k < len(edges):
            e = edges[k]
            v = factor * e.speed_limit_kmh / 3.6
            left = (e.length_m - offset) / v
            if left > remaining:
                offset += remaining * v
                remaining = 0.0
            else:
                remaining -= left
                k += 1
                offset = 0.0
        if k >= len(edges):
            break
        t += interval_s
    pts = []
    for t, k, offset in samples:
        x, y = edges[k].point_at(offset)
        if noise_m > 0:
            x += rng.gauss(0.0, noise_m)
            y += rng.gauss(0.0, noise_m)
        pts.append(GpsPoint(x, y, t0 + t, rng.uniform(*uncertainty)))
    last_k = samples[-1][1]
    truth = route[: last_k + 1]
    return SimulatedTrip(Trajectory(traj_id, tuple(pts)), route, truth)


def simulate_corpus(network: RoadNetwork, count: int, seed: int, prefix: str = "trip", interval_s: float = 10.0,
                    noise_m: float = 0.0, uncertainty: tuple[float, float] = (5.0, 30.0),
                    n_edges: tuple[int, int] = (10, 25), min_points: int = 2,
                    rng: Optional[random.Random] = None) -> list[SimulatedTrip]:
    rng = rng or random.Random(seed)
    trips = []
    while len(trips) < count:
        route = random_route(network, rng, n_edges)
        trip = simulate_trip(network, route, rng, f"{prefix}{len(trips):04d}", interval_s, noise_m, uncertainty)
        if len(trip.trajectory.points) >= min_points:
            trips.append(trip)
    return trips


def edge_recall(truth_edges, matched_edges) -> float:
    truth = set(truth_edges)
    return len(truth & set(matched_edges)) / len(truth)
