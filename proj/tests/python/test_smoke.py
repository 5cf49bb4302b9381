"""Smoke tests for the python extension."""

import json
import pathlib
import shutil

import pytest

import credgraph

DEMO = pathlib.Path(__file__).resolve().parents[2] / "data" / "demo"


def small_graph():
    b = credgraph.GraphBuilder()
    b.add_domain("a.com", score=0.9)
    b.add_domain("b.com", score=0.1)
    b.add_domain("c.com")
    b.add_user("u1")
    b.add_edge("a.com", "b.com", "phi1", weight=3)
    b.add_edge("c.com", "a.com", "phi1")
    b.add_edge("u1", "a.com", "phi2")
    return b.build()


def test_graph_basics():
    g = small_graph()
    assert g.node_count() == 4
    assert g.node_count_of("domain") == 3
    assert g.edge_count_of("phi1") == 2
    assert g.domain_label("a.com") == "reliable"
    assert g.domain_label("b.com") == "unreliable"
    assert g.domain_label("c.com") is None


def test_invariants_raise():
    b = credgraph.GraphBuilder()
    b.add_domain("a.com")
    b.add_user("u1")
    with pytest.raises(credgraph.SchemaError):
        b.add_edge("a.com", "u1", "phi2")  # wrong endpoint types
    with pytest.raises(credgraph.SchemaError):
        b.add_domain("a.com")  # duplicate id
    with pytest.raises(credgraph.DataError):
        credgraph.binarize_label(1.5)


def test_binarize_boundary():
    assert credgraph.binarize_label(0.0) == "unreliable"
    assert credgraph.binarize_label(1.0) == "reliable"
    assert credgraph.binarize_label(0.5162) == "reliable"
    assert credgraph.binarize_label(0.5162, boundary_reliable=False) == "unreliable"


def test_union_idempotent():
    g = small_graph()
    u = credgraph.graph_union(g, g)
    assert u.node_count() == g.node_count()
    assert u.edge_count() == g.edge_count()
    assert sorted(u.edges()) == sorted(g.edges())


def test_stratified_split_deterministic():
    labeled = [(f"r{i}.com", "reliable") for i in range(30)]
    labeled += [(f"u{i}.com", "unreliable") for i in range(20)]
    s1 = credgraph.stratified_split(labeled, seed=5)
    s2 = credgraph.stratified_split(labeled, seed=5)
    assert s1 == s2
    assert len(s1["train"]) == 40
    assert len(s1["val"]) == 5
    assert len(s1["test"]) == 5
    everything = sorted(s1["train"] + s1["val"] + s1["test"])
    assert everything == sorted(d for d, _ in labeled)


def test_walks_are_edge_valid():
    g = small_graph()
    walks = credgraph.generate_walks(g, walk_length=8, walks_per_node=3, seed=1)
    assert len(walks) == 3 * g.node_count()
    undirected = set()
    for src, dst, _, _ in g.edges():
        undirected.add((src, dst))
        undirected.add((dst, src))
    for walk in walks:
        for a, b in zip(walk, walk[1:]):
            assert (a, b) in undirected


def test_positional_features_shape():
    g = small_graph()
    ids, vectors, losses = credgraph.positional_features(
        g, dim=7, walk_length=10, walks_per_node=4, epochs=2, seed=3
    )
    assert len(ids) == g.node_count()
    assert vectors.shape == (g.node_count(), 7)
    assert len(losses) == 2


def test_metric_arithmetic():
    assert credgraph.precision_at_k(
        [(f"d{i}.com", 1.0 - i * 0.01) for i in range(20)],
        {f"d{i}.com": ("reliable" if i in (4, 9) else "unreliable") for i in range(20)},
        20,
    ) == pytest.approx(0.9)

    discovered = [f"d{i}" for i in range(3700)]
    eval_list = [f"d{i}" for i in range(888)] + [f"e{i}" for i in range(1512)]
    m = credgraph.partial_metrics(discovered, [], eval_list)
    assert m["precision"] == pytest.approx(0.24)
    assert m["recall"] == pytest.approx(0.37)
    assert m["pf1"] == pytest.approx(0.29, abs=0.005)

    curve = credgraph.threshold_sweep(
        [("a", 0.9), ("b", 0.6), ("c", 0.2)], [], ["a", "zzz"], [0.1, 0.5, 0.95]
    )
    assert [p["discovered"] for p in curve] == [3, 2, 0]
    recalls = [p["recall"] for p in curve]
    assert recalls == sorted(recalls, reverse=True)


def test_quintile_batches():
    train = [(f"r{i:02d}", 1.0 - 0.01 * i, "reliable") for i in range(10)]
    train += [(f"u{i:02d}", 0.4 - 0.01 * i, "unreliable") for i in range(10)]
    batches = credgraph.quintile_batches(train)
    assert len(batches) == 10
    assert batches[0] == ["r00", "r01"]
    assert batches[9] == ["u08", "u09"]


def test_run_pipeline_end_to_end(tmp_path):
    config = json.loads((DEMO / "config.json").read_text())
    config["out_dir"] = str(tmp_path / "run")
    config["train"]["max_epochs"] = 40
    config["train"]["patience"] = 10

    errors = credgraph.validate_config(json.dumps(config), str(DEMO))
    assert errors == []

    report = credgraph.run_pipeline(json.dumps(config), str(DEMO))
    report_path = pathlib.Path(report)
    assert report_path.name == "report.json"
    metrics = json.loads((tmp_path / "run" / "metrics.json").read_text())
    assert metrics["variant"] == "E_domains_users"
    assert 0.0 <= metrics["classification"]["test_accuracy"] <= 1.0

    # determinism: identical config + seed reproduces the metric report bytes
    config["out_dir"] = str(tmp_path / "run2")
    credgraph.run_pipeline(json.dumps(config), str(DEMO))
    a = (tmp_path / "run" / "metrics.json").read_bytes()
    b = (tmp_path / "run2" / "metrics.json").read_bytes()
    assert a == b

    summary = credgraph.summarize_run(str(tmp_path / "run"))
    assert "test accuracy" in summary
    shutil.rmtree(tmp_path / "run2")


def test_validate_config_reports_missing_paths(tmp_path):
    config = json.loads((DEMO / "config.json").read_text())
    config["out_dir"] = str(tmp_path / "x")
    config["inputs"]["attributes"] = "missing.tsv"
    errors = credgraph.validate_config(json.dumps(config), str(DEMO))
    assert any("attributes" in e for e in errors)
