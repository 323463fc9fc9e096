import json
import subprocess
import sys

import pytest

from gsc_dw.cli import main
from gsc_dw.gsc_core import CarpetSpec, gen_counterexample


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def manifest(out, command):
    return json.loads((out / f"{command}_manifest.json").read_text())


def test_validate_sc(tmp_path, capsys):
    assert main(["validate", "--builtin", "sc", "--out", "o"]) == 0
    m = manifest(tmp_path / "o", "validate")
    assert m["command"] == "validate" and m["spec"]["size"] == 8
    assert set(m["versions"]) >= {"gsc_dw", "numpy", "scipy", "python", "kernel_backend"}
    report = json.loads((tmp_path / "o" / "validation.json").read_text())
    assert report["passed"] is True
    assert "GSC3: pass" in capsys.readouterr().out


def test_validate_counterexample_notes_bb99(capsys):
    assert main(["validate", "--builtin", "counterexample:3,2"]) == 0
    assert "BB99: fails" in capsys.readouterr().out


def test_validate_missing_border(tmp_path, capsys):
    spec = {"d": 2, "l": 3, "S": [[0, 1], [1, 0], [1, 2], [2, 1]]}
    (tmp_path / "bad.json").write_text(json.dumps(spec))
    assert main(["validate", "bad.json"]) == 1
    out = capsys.readouterr().out
    assert "GSC4: FAIL" in out and '"missing": [0, 0]' in out
    report = json.loads((tmp_path / "gsc_out" / "validation.json").read_text())
    assert report["GSC4"]["witness"] == {"missing": [0, 0]}


def test_validate_malformed(tmp_path, capsys):
    (tmp_path / "broken.json").write_text('{"d": 2,\n "l": 3,\n "S": [[0, 0],]}')
    assert main(["validate", "--spec", "broken.json"]) == 2
    assert "line 3" in capsys.readouterr().err
    (tmp_path / "neg.json").write_text('{"d": 2, "l": 3, "S": [[0, -1]]}')
    assert main(["validate", "--spec", "neg.json"]) == 2
    assert "'S'" in capsys.readouterr().err


def test_spec_source_errors(capsys):
    assert main(["validate"]) == 2
    assert main(["validate", "--builtin", "torus"]) == 2
    assert main(["validate", "--spec", "nope.json"]) == 2
    assert main(["validate", "x.json", "--builtin", "sc"]) == 2


def test_generate_round_trip(tmp_path):
    assert main(["generate", "--counterexample", "3,2", "-o", "s32.json"]) == 0
    text = (tmp_path / "s32.json").read_text()
    assert CarpetSpec.from_json(text) == gen_counterexample(3, 2)
    assert json.loads(text) == json.loads(gen_counterexample(3, 2).to_json())
    assert main(["validate", "s32.json"]) == 0
    assert main(["generate", "--counterexample", "2,2", "-o", "x.json"]) == 2
    assert main(["generate", "--counterexample", "three", "-o", "x.json"]) == 2


def test_dw_sc(tmp_path, capsys):
    assert main(["dw", "--builtin", "sc", "--levels", "4", "--out", "a"]) == 0
    data = json.loads((tmp_path / "a" / "scaling.json").read_text())
    assert data["witness"]["passed"] is True
    assert all(m > 0 for m in data["margins"])
    assert (tmp_path / "a" / "scaling.csv").read_text().startswith("level,energy,ratio")
    assert "d_w > 2 witness: pass" in capsys.readouterr().out
    # identical configuration gives byte-identical results
    assert main(["dw", "--builtin", "sc", "--levels", "4", "--out", "b"]) == 0
    assert (tmp_path / "a" / "scaling.json").read_bytes() == (tmp_path / "b" / "scaling.json").read_bytes()
    ma, mb = manifest(tmp_path / "a", "dw"), manifest(tmp_path / "b", "dw")
    for m in (ma, mb):
        m.pop("created")
        m["config"].pop("out")
    assert ma == mb


def test_dw_menger():
    assert main(["dw", "--builtin", "menger", "--levels", "3", "--format", "json"]) == 0


def test_dw_arguments(tmp_path, capsys):
    assert main(["dw", "--builtin", "sc", "--levels", "1"]) == 2
    assert main(["dw", "--builtin", "sc", "--levels", "3", "--format", "xml"]) == 2
    assert main(["dw", "--builtin", "sc", "--levels", "8"]) == 3
    assert "level 8" in capsys.readouterr().err
    # the manifest is written even when the run is refused
    assert manifest(tmp_path / "gsc_out", "dw")["config"]["levels"] == 8


def test_dw_numeric_failure():
    assert main(["dw", "--builtin", "sc", "--levels", "3", "--tol", "0"]) == 4


def test_dw_refuses_invalid_spec(tmp_path):
    (tmp_path / "row.json").write_text(json.dumps({"d": 2, "l": 3, "S": [[0, 0], [1, 0], [2, 0]]}))
    assert main(["dw", "row.json", "--levels", "2"]) == 1


def test_walk_deterministic(tmp_path):
    argv = ["walk", "--builtin", "sc", "--level", "2", "--trials", "20000", "--seed", "7"]
    assert main(argv + ["--out", "w1"]) == 0
    assert main(argv + ["--out", "w2", "--threads", "3"]) == 0
    a = (tmp_path / "w1" / "walk.json").read_bytes()
    assert a == (tmp_path / "w2" / "walk.json").read_bytes()
    assert json.loads(a)["seed"] == 7


def test_profile(tmp_path, capsys):
    assert main(["profile", "--builtin", "sc", "--level", "4", "--coarsen", "2"]) == 0
    lines = (tmp_path / "gsc_out" / "profile.csv").read_text().splitlines()
    assert lines[0] == "quantile,mu_mass" and len(lines) == 4
    assert main(["profile", "--builtin", "sc", "--level", "2", "--coarsen", "2"]) == 2


def test_solve_and_graph(tmp_path):
    assert main(["solve", "--builtin", "sc", "--level", "1"]) == 0
    meta = json.loads((tmp_path / "gsc_out" / "solution_L1.json").read_text())
    assert meta["energy"] == pytest.approx(1.0)
    assert main(["graph", "--builtin", "menger", "--level", "1"]) == 0
    assert json.loads((tmp_path / "gsc_out" / "graph_L1.json").read_text())["edges"] == 24


def test_every_command_writes_a_manifest(tmp_path):
    runs = {
        "validate": ["--builtin", "sc"],
        "dw": ["--builtin", "sc", "--levels", "2"],
        "walk": ["--builtin", "sc", "--level", "1", "--trials", "10"],
        "profile": ["--builtin", "sc", "--level", "2", "--coarsen", "1"],
        "solve": ["--builtin", "sc", "--level", "1"],
        "graph": ["--builtin", "sc", "--level", "1"],
    }
    for cmd, extra in runs.items():
        assert main([cmd, *extra, "--out", cmd]) == 0
        assert manifest(tmp_path / cmd, cmd)["schema"] == "gsc-dw/manifest/1"


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as err:
        main(["dw", "--builtin", "sc"])
    assert err.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gsc_dw", "validate", "--builtin", "menger"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "generalized Sierpinski carpet" in proc.stdout
