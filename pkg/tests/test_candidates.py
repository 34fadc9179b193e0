import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import edge, straight_street
from stmatch.candidates import (
    MatchConfig,
    dynamic_sigma,
    normalize_variant,
    prepare_candidates,
    prepare_candidates_dynamic,
    prepare_candidates_fixed,
)
from stmatch.errors import ConfigError
from stmatch.network import Node, RoadNetwork
from stmatch.scoring import MODIFIED, ST, STB
from stmatch.trajectory import GpsPoint

DYNAMIC = MatchConfig(variant=MODIFIED)


def fan_network(n=7, spacing=5.0):
    """Parallel horizontal edges at y = spacing, 2*spacing, ..."""
    nodes, edges = [], []
    for i in range(n):
        y = spacing * (i + 1)
        nodes += [Node(f"l{i}", -100.0, y), Node(f"r{i}", 100.0, y)]
        edges.append(edge(f"p{i}", f"l{i}", f"r{i}", [(-100.0, y), (100.0, y)]))
    return RoadNetwork(nodes, edges)


def test_fixed_buffer_single_edge():
    net = straight_street(n_edges=1)
    layer = prepare_candidates_fixed(GpsPoint(50, 5, 0), net, r=50, m_max=5)
    [c] = layer.candidates
    assert c.edge_id == "e0"
    assert c.dist_to_gps_m == 5.0
    assert c.position.offset_m == 50.0
    assert layer.sigma_used_m == 20.0 and layer.radius_used_m == 50


def test_fixed_buffer_caps_nearest():
    layer = prepare_candidates_fixed(GpsPoint(0, 0, 0), fan_network(), r=50, m_max=5)
    assert [c.edge_id for c in layer.candidates] == ["p0", "p1", "p2", "p3", "p4"]
    assert [c.dist_to_gps_m for c in layer.candidates] == [5, 10, 15, 20, 25]


def test_fixed_buffer_nothing_in_range():
    layer = prepare_candidates_fixed(GpsPoint(50, 80, 0), straight_street(n_edges=1), r=50, m_max=5)
    assert len(layer) == 0
    with pytest.raises(ConfigError):
        prepare_candidates_fixed(GpsPoint(0, 0, 0), straight_street(), r=0, m_max=5)


def test_dynamic_buffer_found_at_start():
    layer = prepare_candidates_dynamic(GpsPoint(50, 8, 0, 10), straight_street(n_edges=1), DYNAMIC)
    assert layer.radius_used_m == 10
    assert [c.dist_to_gps_m for c in layer.candidates] == [8]
    assert layer.sigma_used_m == 10


def test_dynamic_buffer_grows_in_steps():
    # 10 and 12 miss the edge at 13 m, 14 finds it
    layer = prepare_candidates_dynamic(GpsPoint(50, 13, 0, 10), straight_street(n_edges=1), DYNAMIC)
    assert layer.radius_used_m == 14
    assert len(layer) == 1


def test_dynamic_buffer_starts_at_max_radius():
    layer = prepare_candidates_dynamic(GpsPoint(50, 45, 0, 80), straight_street(n_edges=1), DYNAMIC)
    assert layer.radius_used_m == 50
    assert layer.sigma_used_m == 50
    empty = prepare_candidates_dynamic(GpsPoint(50, 70, 0, 20), straight_street(n_edges=1), DYNAMIC)
    assert len(empty) == 0 and empty.radius_used_m == 50


def test_dynamic_buffer_keeps_everything_in_radius():
    layer = prepare_candidates_dynamic(GpsPoint(0, 0, 0, 40), fan_network(), DYNAMIC)
    assert len(layer) == 7


@pytest.mark.parametrize("u, sigma", [(0, 5), (3, 5), (5, 5), (17.5, 17.5), (50, 50), (90, 50)])
def test_sigma_clamp(u, sigma):
    assert dynamic_sigma(u, DYNAMIC) == sigma


def test_variant_dispatch():
    p = GpsPoint(50, 13, 0, 10)
    net = straight_street(n_edges=1)
    assert prepare_candidates(p, net, MatchConfig(variant=ST)).radius_used_m == 50
    assert prepare_candidates(p, net, MatchConfig(variant=STB)).radius_used_m == 14


points = st.builds(GpsPoint, st.floats(-150, 150), st.floats(-60, 80), st.just(0.0), st.floats(0, 90))


@given(points)
def test_layer_invariants(p):
    net = fan_network()
    for layer in (prepare_candidates_dynamic(p, net, DYNAMIC), prepare_candidates_fixed(p, net, 50, 5)):
        ds = [c.dist_to_gps_m for c in layer.candidates]
        assert all(d <= layer.radius_used_m for d in ds)
        assert ds == sorted(ds)
        ids = [c.edge_id for c in layer.candidates]
        assert len(ids) == len(set(ids))
        for c in layer.candidates:
            assert math.dist(c.position.point, p.xy) == pytest.approx(c.dist_to_gps_m, abs=1e-9)


@given(points)
def test_dynamic_radius_is_minimal(p):
    net = fan_network()
    layer = prepare_candidates_dynamic(p, net, DYNAMIC)
    start = min(p.uncertainty_m, DYNAMIC.r_max_m)
    if layer.radius_used_m > start:
        # the previous step found nothing
        previous = max(layer.radius_used_m - DYNAMIC.buffer_step_m, start)
        assert net.candidates_within(p.xy, previous) == []


def test_config_validation():
    assert normalize_variant("modified") == MODIFIED
    assert normalize_variant("STB") == STB
    with pytest.raises(ConfigError):
        normalize_variant("hmm")
    with pytest.raises(ConfigError):
        MatchConfig(sigma_min_m=60)
    with pytest.raises(ConfigError):
        MatchConfig(max_candidates=0)
    with pytest.raises(ConfigError):
        MatchConfig(dispersion="mad")
    with pytest.raises(ConfigError, match="unknown"):
        MatchConfig.from_dict({"variant": "st", "radius": 10})
    cfg = MatchConfig.from_dict({"variant": "stb", "r_max_m": 80})
    assert cfg.variant == STB and cfg.dynamic and MatchConfig.from_dict(cfg.to_dict()) == cfg
