import csv
import json

import pytest

from lattice_resonances.cli import main, run, version_hash


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def cfg(tmp_path, obj):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(obj))
    return str(p)


def test_bands_two_periodic(tmp_path):
    out = tmp_path / "o"
    assert main(["--config", cfg(tmp_path, {"potential": [0.0, 3.0]}), "--out", str(out), "bands"]) == 0
    r = rows(out / "bands.csv")
    assert r[0] == ["band", "lower", "upper"]
    edges = sorted(float(x) for row in r[1:] for x in row[1:])
    assert len(edges) == 4
    assert abs(edges[0] + 1) < 1e-9 and abs(edges[-1] - 4) < 1e-9
    m = json.loads((out / "manifest.json").read_text())
    assert m["command"] == "bands" and m["version_hash"] == version_hash()
    assert [float(x) for x in m["config"]["potential"]] == [0.0, 3.0]
    assert "bands.csv" in m["files"] and "summary.json" in m["files"]


def test_free_resonances_empty(tmp_path):
    out = tmp_path / "o"
    assert run("resonances", {"potential": [0.0], "L": 20}, out=out) == 0
    assert len(rows(out / "resonances.csv")) == 1


def test_reruns_are_byte_identical(tmp_path):
    c = {"kind": "anderson", "law": ["uniform", -2.0, 2.0], "L": 60, "realizations": 3}
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("resonances", dict(c), seed=7, out=a) == 0
    assert run("resonances", dict(c), seed=7, threads=2, out=b) == 0
    for name in ("resonances.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    assert ma["seed"] == "7"
    assert (a / "resonances.csv").read_bytes().count(b"\r\n") >= 2
    d = tmp_path / "d"
    assert run("resonances", dict(c), seed=8, out=d) == 0
    assert (a / "resonances.csv").read_bytes() != (d / "resonances.csv").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert run("dirichlet", {"L": -3}, out=tmp_path / "x") == 2
    assert run("nope", {}, out=tmp_path / "x") == 2
    assert run("resonances", {"geometry": "ring"}, out=tmp_path / "x") == 2
    assert run("bands", {}, seed=-1, out=tmp_path / "x") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "--out", str(tmp_path / "x"), "bands"]) == 2
    # coincident eigenvalues behind huge barriers: a numerical failure
    assert run("dirichlet", {"potential": [0.0, 1e8, 1e8, 1e8, 0.0], "L": 4},
               out=tmp_path / "y") == 3
    assert "DegenerateSpacing" in capsys.readouterr().err


def test_help_and_version(capsys):
    assert main(["--help"]) == 0
    assert "poisson" in capsys.readouterr().out
    assert main(["--version"]) == 0


def test_predict_and_decay_fit(tmp_path):
    out = tmp_path / "p"
    assert run("predict", {"potential": [0.0, 1.0], "L": 240, "I": [-1.2, -0.4]}, out=out) == 0
    r = rows(out / "predict.csv")
    assert len(r) > 5
    out = tmp_path / "f"
    assert run("decay-fit", {}, out=out) == 0
    s = json.loads((out / "summary.json").read_text())
    assert float(s["slope"]) < 0


@pytest.mark.slow
def test_poisson_end_to_end(tmp_path):
    out = tmp_path / "g"
    c = {"law": ["uniform", -2.0, 2.0], "L": 300, "E0": 0.0, "realizations": 100}
    assert run("poisson", c, seed=11, threads=4, out=out) == 0
    r = rows(out / "poisson.csv")
    assert len(r) == 5
    s = json.loads((out / "summary.json").read_text())
    assert s["rejected"] in (False, "0", 0, "False")
    assert "combined chi2" in (out / "report.txt").read_text()
