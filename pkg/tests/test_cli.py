import json
import os

import numpy as np
import pytest

from tconvex.cli import main
from tconvex.io import read_cloud, sha256_file, write_cloud


@pytest.fixture
def cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _json(path):
    with open(path) as fh:
        return json.load(fh)


def _manifest(path):
    return _json(f"{path}.manifest.json")


def test_sample_torus(cwd):
    assert main(["sample", "--manifold", "torus", "--n", "1000", "--seed", "1",
                 "-o", "t.csv"]) == 0
    x = read_cloud("t.csv")
    assert x.shape == (1000, 3)
    np.testing.assert_allclose((np.hypot(x[:, 0], x[:, 1]) - 4) ** 2 + x[:, 2] ** 2, 1,
                               atol=1e-12)
    m = _manifest("t.csv")
    assert m["command"] == "sample" and m["seed"] == 1
    assert set(m["outputs"]) == {"t.csv"}


def test_sample_variants(cwd):
    assert main(["sample", "--manifold", "circle", "--n", "100", "--noise", "tubular:0.1",
                 "--clean", "c0.csv", "--header", "-o", "c.csv"]) == 0
    x, y = read_cloud("c.csv"), read_cloud("c0.csv")
    assert np.linalg.norm(x - y, axis=1).max() <= 0.1
    assert open("c.csv").readline() == "x0,x1\n"
    assert main(["sample", "--manifold", "circle", "--ambient-dim", "100", "--n", "5",
                 "-o", "c100.csv"]) == 0
    assert read_cloud("c100.csv").shape == (5, 100)
    assert main(["sample", "--manifold", "bumped-sphere", "--n", "20", "-o", "b.csv"]) == 0


def test_sample_from_config(cwd):
    with open("m.json", "w") as fh:
        json.dump({"family": "swissroll", "params": {}, "noise": {"kind": "ambient",
                   "gamma": 0.1}, "seed": 4, "n": 50}, fh)
    assert main(["sample", "--config", "m.json", "-o", "s.csv"]) == 0
    assert read_cloud("s.csv").shape == (50, 3)
    assert _manifest("s.csv")["seed"] == 4


@pytest.mark.parametrize("argv", [
    ["sample", "--manifold", "torus", "--n", "0", "-o", "x.csv"],
    ["sample", "--n", "5", "-o", "x.csv"],
    ["sample", "--manifold", "torus", "--n", "5", "--ambient-dim", "4", "-o", "x.csv"],
])
def test_sample_usage_errors(cwd, argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_experiment_is_a_usage_error(cwd):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "no-such-experiment", "-o", "b.tsv"])
    assert exc.value.code == 2


def test_defect_pair(cwd):
    write_cloud("pair.csv", np.array([[0.0], [2.0]]))
    assert main(["defect", "pair.csv", "--h-tsv", "h.tsv", "-o", "p.json"]) == 0
    doc = _json("p.json")
    assert doc["breakpoints"] == [1.0] and doc["values"] == [1.0] and doc["K"] == 1
    assert open("h.tsv").read() == "t\th\n1.0\t1.0\n"
    assert main(["defect", "pair.csv", "--full", "-o", "f.json"]) == 0
    assert _json("f.json")["horizon"] is None


def test_select_noisy_circle(cwd):
    assert main(["sample", "--manifold", "circle", "--n", "100", "--noise", "tubular:0.1",
                 "--seed", "3", "-o", "c.csv"]) == 0
    assert main(["select", "c.csv", "-o", "sel.json"]) == 0
    doc = _json("sel.json")
    assert 0.1 < doc["t_sel"] < 0.5 and doc["converged"]
    assert os.path.exists("sel.g.tsv") and os.path.exists("sel.h.tsv")
    assert len(open("sel.g.tsv").read().splitlines()) == 102
    m = _manifest("sel.json")
    assert set(m["outputs"]) == {"sel.json", "sel.g.tsv", "sel.h.tsv"}
    assert set(m["inputs"]) == {"c.csv"}


def test_select_fixed_lambda(cwd):
    write_cloud("line.csv", np.array([[0.0], [1.0], [2.0]]))
    assert main(["select", "line.csv", "--lambda", "0.6", "-o", "t.json"]) == 0
    doc = _json("t.json")
    assert doc["t_lambda"] == 1.0 and not doc["saturated"]


def test_select_errors(cwd, capsys):
    with open("bad.csv", "w") as fh:
        fh.write("0,0\n1,1\n2,oops\n")
    assert main(["select", "bad.csv", "-o", "s.json"]) == 1
    assert "row 3" in capsys.readouterr().err
    assert main(["select", "missing.csv", "-o", "s.json"]) == 1


def test_reconstruct_square(cwd):
    write_cloud("sq.csv", np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
    assert main(["reconstruct", "sq.csv", "--t", "0.5", "--dim", "2", "-o", "c.json"]) == 0
    doc = _json("c.json")
    assert len(doc["simplices"]["1"]) == 4 and doc["simplices"]["2"] == []
    assert main(["reconstruct", "sq.csv", "--t", "0", "--dim", "2", "-o", "c0.json"]) == 0
    assert _json("c0.json")["simplices"]["1"] == []
    assert main(["reconstruct", "sq.csv", "--t", "oracle:2:0.5", "--dim", "2",
                 "-o", "co.json"]) == 0
    assert main(["reconstruct", "sq.csv", "--t", "auto", "--dim", "2", "-o", "ca.json"]) == 0
    assert main(["reconstruct", "sq.csv", "--t", "2", "--dim", "2", "--max-simplices", "3",
                 "-o", "cx.json"]) == 1


@pytest.mark.parametrize("t", ["-1", "abc", "oracle:2", "oracle:0:1", "nan"])
def test_reconstruct_bad_scale(cwd, t):
    write_cloud("sq.csv", np.eye(3))
    assert main(["reconstruct", "sq.csv", "--t", t, "--dim", "2", "-o", "c.json"]) == 2


def test_reconstruct_auto_needs_three_points(cwd):
    write_cloud("two.csv", np.eye(2))
    assert main(["reconstruct", "two.csv", "--t", "auto", "--dim", "1", "-o", "c.json"]) == 1


def test_tangent(cwd):
    assert main(["sample", "--manifold", "circle", "--n", "400", "--seed", "2",
                 "-o", "c.csv"]) == 0
    assert main(["tangent", "c.csv", "--dim", "1", "--t", "0.02", "--points", "0,5-7",
                 "-o", "tan.tsv"]) == 0
    lines = open("tan.tsv").read().splitlines()
    assert lines[0].split("\t") == ["index", "scale", "v0_0", "v0_1"]
    assert [ln.split("\t")[0] for ln in lines[1:]] == ["0", "5", "6", "7"]
    assert float(lines[1].split("\t")[1]) == pytest.approx(0.22)
    x = read_cloud("c.csv")
    v = np.array(lines[1].split("\t")[2:], dtype=float)
    assert abs(v @ x[0]) < 0.2  # tangent of the unit circle is orthogonal to the radius
    assert main(["tangent", "c.csv", "--dim", "1", "--points", "999", "-o", "t2.tsv"]) == 2


def test_outputs_are_byte_identical_on_rerun(cwd):
    argv = ["sample", "--manifold", "torus", "--n", "300", "--seed", "5", "-o", "a.csv"]
    assert main(argv) == 0
    first = open("a.csv", "rb").read()
    for cmd in (["select", "a.csv", "-o", "s.json"],
                ["reconstruct", "a.csv", "--t", "0.6", "--dim", "2", "-o", "c.json"]):
        assert main(cmd) == 0
    snap = {p: open(p, "rb").read() for p in ("s.json", "s.g.tsv", "s.h.tsv", "c.json")}
    assert main(argv) == 0 and open("a.csv", "rb").read() == first
    assert main(["--threads", "1", "select", "a.csv", "-o", "s.json"]) == 0
    assert main(["reconstruct", "a.csv", "--t", "0.6", "--dim", "2", "-o", "c.json"]) == 0
    for p, data in snap.items():
        assert open(p, "rb").read() == data
    assert _manifest("s.json")["outputs"]["s.json"] == sha256_file("s.json")


def test_threads_environment(cwd, monkeypatch):
    write_cloud("sq.csv", np.eye(3))
    monkeypatch.setenv("MFLD_THREADS", "zero")
    assert main(["reconstruct", "sq.csv", "--t", "1", "--dim", "2", "-o", "c.json"]) == 2
    monkeypatch.setenv("MFLD_THREADS", "1")
    assert main(["reconstruct", "sq.csv", "--t", "1", "--dim", "2", "-o", "c.json"]) == 0


def test_bench_noisy_circle_small(cwd):
    assert main(["bench", "noisy-circle", "--trials", "2", "--quiet", "-o", "b.tsv"]) == 0
    rows = open("b.tsv").read().splitlines()
    assert rows[0].split("\t")[:4] == ["experiment", "family", "n", "seed"]
    assert len(rows) == 3
    summary = _json("b.summary.json")
    assert summary["cells"][0]["trials"] == 2
    assert summary["experiment"]["name"] == "noisy-circle"
    m = _manifest("b.tsv")
    assert set(m["outputs"]) == {"b.tsv", "b.summary.json"}


def test_custom_manifest_path(cwd):
    write_cloud("sq.csv", np.eye(3))
    assert main(["--manifest", "run.json", "reconstruct", "sq.csv", "--t", "1", "--dim", "2",
                 "-o", "c.json"]) == 0
    assert _json("run.json")["command"] == "reconstruct"
