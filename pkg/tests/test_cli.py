import json

import numpy as np

from expofront.cli import main
from expofront.harness import dump_instances, load_instances

from conftest import make_toy2, make_toy3


def test_synth_then_front_then_aggregate(tmp_path):
    ds = tmp_path / "ds.json"
    assert main(["synth", "Ds", "3", "--seed", "4", "--out", str(ds)]) == 0
    assert len(load_instances(ds)) == 3
    out = tmp_path / "run"
    assert main(["front", "pexpo", "--instances", str(ds), "--out", str(out), "--t", "20"]) == 0
    assert (out / "fronts.csv").exists() and (out / "runtime.json").exists()
    agg = tmp_path / "agg.json"
    assert main(["aggregate", str(out / "fronts.csv"), "--grid-size", "5", "--format", "json",
                 "--out", str(agg)]) == 0
    curve = json.loads(agg.read_text())
    assert curve["grid"] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert curve["meanUtility"][-1] == 1.0


def test_synth_policy_flag(tmp_path):
    ds = tmp_path / "ds.json"
    assert main(["synth", "Ds", "2", "--policy", "size-proportional", "--out", str(ds)]) == 0
    for q in load_instances(ds):
        np.testing.assert_allclose(q.target, q.group_sizes / q.n * q.gamma.sum())


def test_front_json_output(tmp_path, capsys):
    ds = tmp_path / "ds.json"
    dump_instances([make_toy3()], ds)
    assert main(["front", "qp-sweep", "--instances", str(ds), "--n-points", "3",
                 "--no-decompose", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [r["queryId"] for r in rows] == ["toy3"] * 3
    assert rows[-1]["normalizedUtility"] == 1.0


def test_ctrl_command(tmp_path, capsys):
    ds = tmp_path / "ds.json"
    dump_instances([make_toy3()], ds)
    assert main(["ctrl", "--instances", str(ds), "--lambda-grid", "0,10", "--t", "50"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and lines[1].split(",")[2] == "0.0"


def test_decompose_commands(tmp_path, capsys):
    x = tmp_path / "x.json"
    x.write_text(json.dumps({"exposure": [0.75, 0.75], "gamma": [1.0, 0.5]}))
    assert main(["decompose", "caratheodory", str(x), "--format", "json"]) == 0
    atoms = json.loads(capsys.readouterr().out)["atoms"]
    assert sorted(a["ranking"] for a in atoms) == [[0, 1], [1, 0]]
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"matrix": np.eye(3).tolist()}))
    assert main(["decompose", "bvn", str(m)]) == 0
    assert capsys.readouterr().out.splitlines() == ["weight,ranking", '1.0,"[0, 1, 2]"']


def test_parse_command(tmp_path):
    src = tmp_path / "q.txt"
    src.write_text("2 qid:1 132:7.2\n0 qid:1 132:3.0\n4 qid:1 132:12.0\n1 qid:1 132:4.0\n"
                   "1 qid:2 132:1.0\n")
    out, drops = tmp_path / "q.json", tmp_path / "drops.json"
    assert main(["parse", str(src), "--bin-edges", "5,10", "--out", str(out),
                 "--drops", str(drops)]) == 0
    assert [q.query_id for q in load_instances(out)] == ["1"]
    assert json.loads(drops.read_text())["singleDocument"] == 1


def test_library_errors_exit_nonzero(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text('{"instances": []}')
    assert main(["front", "pexpo", "--instances", str(empty)]) == 2


def test_failures_above_threshold_exit_one(tmp_path, monkeypatch):
    from expofront.errors import SolverStalled
    from expofront.harness import experiment

    def broken(instance):
        raise SolverStalled("stub")

    monkeypatch.setattr(experiment, "pexpo_front", broken)
    ds = tmp_path / "ds.json"
    dump_instances([make_toy2(), make_toy3()], ds)
    assert main(["front", "pexpo", "--instances", str(ds), "--out", str(tmp_path / "o")]) == 1
