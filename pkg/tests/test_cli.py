import csv
import json
import logging

import pytest

from conftest import edge, straight_street, write_result_dir
from stmatch import io
from stmatch.cli import main
from stmatch.network import Node, RoadNetwork, write_network
from stmatch.speeds import impute_speed_limits
from stmatch.synthetic import make_grid_city, simulate_corpus
from stmatch.trajectory import load_trajectories, write_trajectories

HEADER = "trajectory_id,x,y,uncertainty,timestamp\n"


def write_rows(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(HEADER)
        for tid, pts in rows:
            for x, y, t in pts:
                fh.write(f"{tid},{x},{y},10,{t}\n")
    return path


def write_config(path, **values):
    path.write_text(json.dumps({k: str(v) if hasattr(v, "parts") else v for k, v in values.items()}))
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


@pytest.fixture(scope="module")
def city(tmp_path_factory):
    """Small grid network with a clean and a noisy corpus on disk."""
    d = tmp_path_factory.mktemp("city")
    net = make_grid_city(n=11)
    write_network(net, d / "nodes.csv", d / "edges.csv")
    write_trajectories(d / "clean.csv", [t.trajectory for t in simulate_corpus(net, 6, seed=4, n_edges=(6, 12))])
    write_trajectories(d / "noisy.csv",
                       [t.trajectory for t in simulate_corpus(net, 6, seed=5, noise_m=5, n_edges=(6, 12))])
    write_trajectories(d / "history.csv",
                       [t.trajectory for t in simulate_corpus(net, 30, seed=6, noise_m=5, prefix="hist")])
    return d


def run(*argv):
    return main([str(a) for a in argv])


# preprocess

def line(tid, n, x0=100, dx=10, dt=1):
    return tid, [(x0 + dx * i, 500, dt * i) for i in range(n)]


def test_preprocess_all_pass(tmp_path):
    traj = write_rows(tmp_path / "t.csv", [line(f"t{i}", 12) for i in range(5)])
    cfg = write_config(tmp_path / "c.json", trajectories="t.csv")
    assert run("preprocess", "--config", cfg) == 0
    stats = json.loads((tmp_path / "output" / "preprocess_stats.json").read_text())
    assert stats["removed"] == {"input": 5, "min_points": 0, "min_speed": 0, "output": 5}
    assert load_trajectories(tmp_path / "output" / "preprocessed.csv") == load_trajectories(traj)


def test_preprocess_removes_short_trajectories(tmp_path):
    rows = [line(f"t{i:02d}", 5 if i % 4 == 0 else 12) for i in range(20)]
    write_rows(tmp_path / "t.csv", rows)
    cfg = write_config(tmp_path / "c.json", trajectories="t.csv")
    assert run("preprocess", "--config", cfg) == 0
    stats = json.loads((tmp_path / "output" / "preprocess_stats.json").read_text())
    assert stats["removed"]["min_points"] == 5 and stats["removed"]["output"] == 15


def test_preprocess_hand_traced_fixture(tmp_path):
    # polygon is the square 0..1000; points move 10 m per second unless noted
    rows = [
        line("k0", 12), line("k1", 12), line("k2", 12),
        line("o0", 12, x0=2000),       # entirely outside
        line("o1", 12, x0=995),        # one point left after clipping
        line("s0", 9),                 # too short
        line("c0", 14, x0=925),        # clipped to 8 points
        ("v0", [(500, 500, i) for i in range(12)]),   # stationary
        line("v1", 12, dx=1, dt=10),   # 0.36 km/h
        line("c1", 15, x0=885),        # clipped to 12 points, still valid
    ]
    write_rows(tmp_path / "t.csv", rows)
    (tmp_path / "poly.wkt").write_text("POLYGON((0 0, 1000 0, 1000 1000, 0 1000, 0 0))")
    cfg = write_config(tmp_path / "c.json", trajectories="t.csv", polygon="poly.wkt")
    assert run("preprocess", "--config", cfg) == 0
    stats = json.loads((tmp_path / "output" / "preprocess_stats.json").read_text())
    assert stats["removed"] == {"input": 10, "polygon": 2, "min_points": 2, "min_speed": 2, "output": 4}
    kept = load_trajectories(tmp_path / "output" / "preprocessed.csv")
    assert [t.id for t in kept] == ["c1", "k0", "k1", "k2"]
    assert len(kept[0]) == 12


def test_preprocess_sampling_is_seeded(tmp_path):
    write_rows(tmp_path / "t.csv", [line(f"t{i:02d}", 12) for i in range(30)])
    cfg = write_config(tmp_path / "c.json", trajectories="t.csv", sample_size=7)
    picks = []
    for seed in (3, 3, 4):
        out = tmp_path / f"out{len(picks)}"
        assert run("preprocess", "--config", cfg, "--seed", seed, "--output-dir", out) == 0
        text = (out / "preprocessed.csv").read_text()
        assert text.startswith(f"# seed={seed} sample_size=7\n")
        picks.append(sorted({t.id for t in load_trajectories(out / "preprocessed.csv")}))
    assert picks[0] == picks[1] != picks[2]
    assert len(picks[0]) == 7


def test_preprocess_empty_output_exit_code(tmp_path):
    write_rows(tmp_path / "t.csv", [line("a", 3)])
    cfg = write_config(tmp_path / "c.json", trajectories="t.csv")
    assert run("preprocess", "--config", cfg) == 1


# downsample

def test_downsample(tmp_path):
    write_rows(tmp_path / "t.csv", [("a", [(t, 0, t) for t in range(0, 601, 60)])])
    cfg = write_config(tmp_path / "c.json", trajectories="t.csv", min_interval_s=120)
    assert run("downsample", "--config", cfg) == 0
    [low] = load_trajectories(tmp_path / "output" / "lowfreq.csv")
    assert [p.t for p in low.points] == [0, 120, 240, 360, 480, 600]
    assert low.source_id == "a"


# train-scores

def street_workspace(tmp_path):
    net = straight_street(n_edges=4)
    write_network(net, tmp_path / "nodes.csv", tmp_path / "edges.csv")
    return net


def test_train_scores_hand_counts(tmp_path):
    street_workspace(tmp_path)
    write_rows(tmp_path / "hist.csv", [("a", [(50, 0, 0), (100, 0, 10), (150, 0, 20)]),
                                       ("b", [(250, 3, 0), (350, 0, 10)])])
    # uncertainty 10: the node point reaches both neighbours, mid-edge points one edge
    cfg = write_config(tmp_path / "c.json", nodes="nodes.csv", edges="edges.csv", training_trajectories="hist.csv")
    assert run("train-scores", "--config", cfg) == 0
    rows = {r["edge_id"]: r for r in read_csv(tmp_path / "output" / "edge_scores.csv")}
    assert {k: int(r["raw_count"]) for k, r in rows.items()} == {"e0": 2, "e1": 2, "e2": 1, "e3": 1}
    assert float(rows["e0"]["normalized"]) == 1.0
    assert float(rows["e2"]["normalized"]) == pytest.approx(0.630929753571457, rel=1e-12)  # ln 2 / ln 3
    scored = read_csv(tmp_path / "output" / "network_edges_scored.csv")
    assert {r["id"]: int(r["usage_count"]) for r in scored}["e1"] == 2


def test_train_scores_deterministic(city, tmp_path):
    cfg = write_config(tmp_path / "c.json", nodes=city / "nodes.csv", edges=city / "edges.csv",
                       training_trajectories=city / "history.csv", train_size=20)
    assert run("train-scores", "--config", cfg, "--seed", 2, "--output-dir", tmp_path / "a") == 0
    assert run("train-scores", "--config", cfg, "--seed", 2, "--output-dir", tmp_path / "b") == 0
    assert run("train-scores", "--config", cfg, "--seed", 9, "--output-dir", tmp_path / "c") == 0
    a, b, c = ((tmp_path / d / "edge_scores.csv").read_text() for d in "abc")
    assert a == b and a != c


def test_train_scores_empty_history(tmp_path, caplog):
    street_workspace(tmp_path)
    (tmp_path / "hist.csv").write_text(HEADER)
    cfg = write_config(tmp_path / "c.json", nodes="nodes.csv", edges="edges.csv", training_trajectories="hist.csv")
    with caplog.at_level(logging.WARNING):
        assert run("train-scores", "--config", cfg) == 0
    assert "empty training set" in caplog.text
    rows = read_csv(tmp_path / "output" / "edge_scores.csv")
    assert {r["raw_count"] for r in rows} == {"0"} and {float(r["normalized"]) for r in rows} == {0.0}


def test_train_scores_warns_on_evaluation_overlap(city, tmp_path, capsys, caplog):
    cfg = write_config(tmp_path / "c.json", nodes=city / "nodes.csv", edges=city / "edges.csv",
                       training_trajectories=city / "history.csv", evaluation_trajectories=city / "history.csv",
                       train_size=5, output_dir=tmp_path / "out")
    with caplog.at_level(logging.WARNING):
        assert run("train-scores", "--config", cfg) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["evaluation_overlap"] == 5
    assert "also appear in the evaluation set" in caplog.text


# match

def match_config(city, tmp_path, corpus="clean.csv", **extra):
    return write_config(tmp_path / "c.json", nodes=city / "nodes.csv", edges=city / "edges.csv",
                        trajectories=city / corpus, output_dir=tmp_path / "out", **extra)


def test_match_outputs_and_candidate_totals(city, tmp_path):
    cfg = match_config(city, tmp_path, "noisy.csv")
    assert run("match", "--config", cfg, "--variant", "st", "--geojson") == 0
    assert run("match", "--config", cfg, "--variant", "modified") == 0
    st_dir, mod_dir = tmp_path / "out" / "ST", tmp_path / "out" / "ModifiedST"
    for d in (st_dir, mod_dir):
        assert {p.name for p in d.iterdir()} >= {"summary.csv", "paths.csv", "metrics.csv", "failures.csv"}
    assert json.loads((st_dir / "matched.geojson").read_text())["type"] == "FeatureCollection"
    e3 = {d.name: sum(m["e3_total_candidates"] for m in io.read_metrics(d / "metrics.csv").values())
          for d in (st_dir, mod_dir)}
    assert e3["ModifiedST"] < e3["ST"]
    first = (st_dir / "paths.csv").read_text().splitlines()
    assert first[0].startswith("# variant=ST seed=0")
    assert first[1].startswith("# config=")


def test_match_partial_failure(tmp_path):
    # an edge unreachable from the street
    net = straight_street(n_edges=3)
    island = RoadNetwork(list(net.nodes.values()) + [Node("i0", 0, 500), Node("i1", 100, 500)],
                         list(net.edges.values()) + [edge("iso", "i0", "i1", [(0, 500), (100, 500)])])
    impute_speed_limits(island)
    write_network(island, tmp_path / "nodes.csv", tmp_path / "edges.csv")
    write_rows(tmp_path / "t.csv", [("good", [(50, 0, 0), (150, 0, 10), (250, 0, 20)]),
                                    ("jump", [(50, 0, 0), (150, 0, 10), (50, 500, 20)])])
    cfg = write_config(tmp_path / "c.json", nodes="nodes.csv", edges="edges.csv", trajectories="t.csv")
    assert run("match", "--config", cfg, "--variant", "st") == 1
    [fail] = read_csv(tmp_path / "output" / "ST" / "failures.csv")
    assert fail["trajectory_id"] == "jump" and fail["layer_pair"] == "1-2"
    assert list(io.read_paths(tmp_path / "output" / "ST" / "paths.csv")) == ["good"]


def test_stb_needs_scores(city, tmp_path):
    cfg = match_config(city, tmp_path)
    assert run("match", "--config", cfg, "--variant", "stb") == 2
    assert not (tmp_path / "out" / "STB").exists()


def test_stb_with_scored_network(city, tmp_path):
    train = write_config(tmp_path / "t.json", nodes=city / "nodes.csv", edges=city / "edges.csv",
                         training_trajectories=city / "history.csv", output_dir=tmp_path / "scores")
    assert run("train-scores", "--config", train) == 0
    cfg = write_config(tmp_path / "c.json", nodes=tmp_path / "scores" / "network_nodes.csv",
                       edges=tmp_path / "scores" / "network_edges_scored.csv", trajectories=city / "clean.csv",
                       output_dir=tmp_path / "out")
    assert run("match", "--config", cfg, "--variant", "stb") == 0
    assert len(io.read_paths(tmp_path / "out" / "STB" / "paths.csv")) == 6


@pytest.mark.parametrize("body", [{"trajectories": "x.csv", "colour": "red"}, {"workers": 0},
                                  {"match": {"st": {"radius": 3}}}])
def test_bad_config_exit_code(tmp_path, body):
    (tmp_path / "c.json").write_text(json.dumps(body))
    assert run("match", "--config", tmp_path / "c.json") == 2


def test_missing_input_and_usage_errors(tmp_path):
    cfg = write_config(tmp_path / "c.json", nodes="nope.csv", edges="nope.csv", trajectories="nope.csv")
    assert run("match", "--config", cfg) == 2
    assert run("match", "--variant", "fancy") == 2
    assert run("match") == 2


def test_flags_override_config(city, tmp_path):
    cfg = match_config(city, tmp_path, variant="st", seed=1, sample_size=3)
    assert run("match", "--config", cfg, "--variant", "modified", "--seed", 8) == 0
    out = tmp_path / "out" / "ModifiedST"
    assert not (tmp_path / "out" / "ST").exists()
    assert (out / "paths.csv").read_text().startswith("# variant=ModifiedST seed=8 sample_size=3")
    assert len(io.read_paths(out / "paths.csv")) == 3


def test_matcher_settings_from_config(city, tmp_path):
    cfg = match_config(city, tmp_path, match={"st": {"max_candidates": 1}})
    assert run("match", "--config", cfg, "--variant", "st") == 0
    metrics = io.read_metrics(tmp_path / "out" / "ST" / "metrics.csv")
    assert all(m["e2_avg_candidates"] == 1 for m in metrics.values())


def test_workers_do_not_change_results(city, tmp_path):
    cfg = match_config(city, tmp_path, "noisy.csv")
    assert run("match", "--config", cfg, "--output-dir", tmp_path / "w1") == 0
    assert run("match", "--config", cfg, "--output-dir", tmp_path / "w2", "--workers", 2) == 0
    for name in ("paths.csv", "metrics.csv", "summary.csv"):
        a = read_csv(tmp_path / "w1" / "ModifiedST" / name)
        b = read_csv(tmp_path / "w2" / "ModifiedST" / name)
        for row in a + b:
            row.pop("runtime_s", None)
            row.pop("e1_runtime_s", None)
        assert a == b


# compare

def test_compare_variant_with_itself(city, tmp_path):
    cfg = match_config(city, tmp_path, "noisy.csv")
    assert run("match", "--config", cfg) == 0
    res = tmp_path / "out" / "ModifiedST"
    assert run("compare", "--a", res, "--b", res, "--reference", res, "--output-dir", tmp_path / "cmp") == 0
    for row in read_csv(tmp_path / "cmp" / "comparison.csv"):
        if row["metric"] != "e1_runtime_s":
            assert float(row["t"]) == 0.0 and float(row["p"]) == 1.0
    overlap = {r["classification"]: r for r in read_csv(tmp_path / "cmp" / "overlap.csv")}
    assert overlap["equal"]["percentage"] == "100.00" and overlap["total"]["count"] == "6"


def test_compare_overlap_classification(tmp_path):
    ref = write_result_dir(tmp_path / "ref", "ST", {"s1": ["a", "b", "c"], "s2": ["a", "b"], "s3": ["x", "y"]})
    low = ["s1_low", "s2_low", "s3_low"]
    a = write_result_dir(tmp_path / "a", "ST", {"s1": ["a", "b"], "s2": ["a"], "s3": ["x"]}, low)
    b = write_result_dir(tmp_path / "b", "STB", {"s1": ["a"], "s2": ["a", "b"], "s3": ["y", "z"]}, low)
    assert run("compare", "--a", a, "--b", b, "--reference", ref, "--output-dir", tmp_path / "cmp") == 0
    rows = read_csv(tmp_path / "cmp" / "overlap.csv")
    overlap = {r["classification"]: (int(r["count"]), r["percentage"]) for r in rows}
    assert overlap == {"equal": (1, "33.33"), "a_closer": (1, "33.33"), "b_closer": (1, "33.33"),
                       "total": (3, "100.00")}
    header = (tmp_path / "cmp" / "overlap.csv").read_text().splitlines()[0]
    assert header == "# a=ST b=STB reference=ST"


def test_compare_without_shared_trajectories(tmp_path):
    a = write_result_dir(tmp_path / "a", "ST", {"s1": ["a"], "s2": ["b"]})
    b = write_result_dir(tmp_path / "b", "STB", {"s3": ["a"], "s4": ["b"]})
    assert run("compare", "--a", a, "--b", b, "--output-dir", tmp_path / "cmp") == 2
    assert run("compare", "--a", tmp_path, "--b", b) == 2


def test_network_stats(city, tmp_path):
    cfg = write_config(tmp_path / "c.json", nodes=city / "nodes.csv", edges=city / "edges.csv")
    assert run("network-stats", "--config", cfg) == 0
    stats = json.loads((tmp_path / "output" / "network_stats.json").read_text())
    assert stats["nodes"] == 121
