import json
import random

import pytest

from galla.cli import main
from galla.minilang import read_graphs
from galla.minilang.generate import random_program

ADD = "def add(a, b):\n    c = a + b\n    return c\n"


@pytest.fixture(scope="module")
def units(tmp_path_factory):
    d = tmp_path_factory.mktemp("units")
    rng = random.Random(3)
    for i in range(120):
        (d / f"u{i:03d}.mini").write_text(random_program(rng, max_statements=5))
    (d / "broken.mini").write_text("def f(:\n")
    return d


def test_extract_and_rejections(units, tmp_path, capsys):
    out, rej = tmp_path / "graphs.jsonl", tmp_path / "rejected.json"
    assert main(["extract", "--in", str(units), "-o", str(out), "--rejected", str(rej)]) == 0
    assert len(read_graphs(out)) == 120
    assert [r["unit_id"] for r in json.loads(rej.read_text())] == ["broken"]
    assert "extracted 120 graphs, rejected 1" in capsys.readouterr().out


def test_extract_with_nothing_accepted_is_a_validation_failure(tmp_path, capsys):
    (tmp_path / "bad.mini").write_text("while\n")
    assert main(["extract", "--in", str(tmp_path), "-o", str(tmp_path / "g.jsonl")]) == 1
    assert "ValidationFailure" in capsys.readouterr().err


def test_build_data_writes_manifest(units, tmp_path):
    graphs = tmp_path / "graphs.jsonl"
    main(["extract", "--in", str(units), "-o", str(graphs)])
    out = tmp_path / "data"
    assert main(["build-data", "--graphs", str(graphs), "--out", str(out), "--per-cell", "20",
                 "--downstream", "30", "--test-per-cell", "5"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["train"]["cells"]["DFG/EdgePred"] == 20
    assert man["test"]["cells"]["AST/ChildPred"] == 5
    assert len(man["train_sha256"]) == 64
    again = tmp_path / "again"
    main(["build-data", "--graphs", str(graphs), "--out", str(again), "--per-cell", "20",
          "--downstream", "30", "--test-per-cell", "5"])
    assert (again / "train.jsonl").read_bytes() == (out / "train.jsonl").read_bytes()


def test_build_data_over_reuse_cap(units, tmp_path):
    graphs = tmp_path / "graphs.jsonl"
    main(["extract", "--in", str(units), "-o", str(graphs)])
    assert main(["build-data", "--graphs", str(graphs), "--out", str(tmp_path / "d"), "--per-cell", "5000"]) == 1


def test_inspect_graph_prints_tables(tmp_path, capsys):
    f = tmp_path / "add.mini"
    f.write_text(ADD)
    assert main(["inspect-graph", str(f)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("graph add:")
    assert "AST nodes" in out and "DFG edges" in out


def test_usage_errors_exit_two(capsys):
    for argv in (["frobnicate"], [], ["extract"], ["ablate"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    capsys.readouterr()


def test_missing_files_exit_one(tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path / "none.ckpt"), "--data", str(tmp_path),
                 "--graphs", str(tmp_path / "g.jsonl"), "--out", str(tmp_path / "r.json")]) == 1
    plan = tmp_path / "plan.toml"
    plan.write_text('stage = "Stage2"\n[paths]\ninit = "x.ckpt"\n')
    assert main(["train", "--plan", str(plan)]) == 1
    plan.write_text('epochs = 1\n')
    assert main(["train", "--plan", str(plan)]) == 1
    capsys.readouterr()


def test_ablate_tabulates_results(tmp_path, capsys):
    rec = [{"run_id": "galla", "task": "EdgePred", "metric": "accuracy", "value": 0.75, "n": 8,
            "unparseable": 0, "zero_graph": False}]
    f = tmp_path / "r.json"
    f.write_text(json.dumps(rec))
    assert main(["ablate", "--results", str(f), "--out", str(tmp_path / "t.json")]) == 0
    assert "0.7500" in (tmp_path / "t.txt").read_text()
    capsys.readouterr()
