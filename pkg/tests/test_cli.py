import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from opstat import tolerances
from opstat.cli import main
from opstat.operators import write_matrix
from opstat.selftest import run_selftest

TIMESTAMP_KEY = "timestamp"


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def h_json(tmp_path):
    path = tmp_path / "h.json"
    write_matrix(path, np.array([[1.0, 0.5j, 0], [-0.5j, -2.0, 0.3], [0, 0.3, 0.4]]))
    return path


def test_spectral_smoke(tmp_path, h_json, capsys):
    out = tmp_path / "o"
    code, _, err = run_cli(["run", "spectral", "--matrix", str(h_json), "--partition", "8",
                            "--out", str(out), "--report", str(tmp_path / "rep.json")], capsys)
    assert code == 0, err
    rep = json.loads((out / "spectral.json").read_text())
    assert len(rep["projectors"]) == 8
    assert sum(p["rank"] for p in rep["projectors"]) == 3
    assert rep["completeness_defect"] <= 1e-9
    add = json.loads((tmp_path / "rep.json").read_text())
    assert set(add) == {"trials", "max_defect", "pass_fraction", "defects"}
    assert add["pass_fraction"] == 1.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["parameters"]["partition"] == 8
    assert manifest["config"]["seed"] == 0
    assert {"started_utc", "wall_time_s"} == set(manifest[TIMESTAMP_KEY])


def test_holevo_row_count(tmp_path, capsys):
    out = tmp_path / "h"
    code, _, err = run_cli(["run", "holevo-additivity", "--channels", "random", "--dim", "2",
                            "--pairs", "20", "--seed", "7", "--restarts", "2", "--out", str(out)], capsys)
    assert code == 0, err
    rows = list(csv.DictReader(io.StringIO((out / "holevo_additivity.csv").read_text())))
    assert len(rows) == 20
    assert {r["verdict"] for r in rows} <= {"additive_within_tolerance", "superadditive_signal", "inconclusive"}


@pytest.mark.parametrize(
    "content, field",
    [
        ({"dim": 2, "im": [[0, 0], [0, 0]]}, "re"),
        ({"dim": 2, "re": [[1, 0], [0, 1]], "im": [[0, 0]]}, "im"),
        ({"dim": "two", "re": [[1]], "im": [[0]]}, "dim"),
    ],
)
def test_malformed_matrix_exit_1(tmp_path, capsys, content, field):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(content))
    code, _, err = run_cli(["spectral", "--matrix", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    assert field in err and "bad.json" in err


def test_invalid_json_names_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"dim": 1,\n"re": [[1]],\n"im": [[0]]\n,}')
    code, _, err = run_cli(["spectral", "--matrix", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and "bad.json:4" in err


def test_non_hermitian_is_validation_error(tmp_path, capsys):
    path = tmp_path / "nh.json"
    write_matrix(path, np.array([[0.0, 1.0], [0.0, 0.0]]))
    code, _, _ = run_cli(["spectral", "--matrix", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 1


def test_numerical_failure_exit_2(tmp_path, capsys):
    path = tmp_path / "huge.json"
    write_matrix(path, np.diag([1e13, 0.0]))
    code, _, err = run_cli(["spectral", "--matrix", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and "numerical failure" in err and "ill-conditioned" in err


def test_unitary_input(tmp_path, capsys):
    path = tmp_path / "u.json"
    write_matrix(path, -np.eye(2))
    code, _, _ = run_cli(["spectral", "--matrix", str(path), "--unitary", "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "o" / "spectral.json").read_text())
    assert rep["eigenphases"] == [np.pi, np.pi] and "cayley_roundtrip_defect" not in rep


def test_bad_usage_exit_1(tmp_path, capsys):
    assert run_cli(["run", "nonsense"], capsys)[0] == 1
    assert run_cli(["spectral", "--seed", "-4", "--out", str(tmp_path)], capsys)[0] == 1
    assert run_cli(["sde", "--steps", "64,32", "--out", str(tmp_path)], capsys)[0] == 1


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        'experiment = "sde-convergence"\nseed = 5\n[parameters]\nsteps = "16,32,64"\npaths = 200\n'
    )
    out = tmp_path / "o"
    code, _, err = run_cli(["sde", "--config", str(cfg), "--paths", "100", "--out", str(out)], capsys)
    assert code == 0, err
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["seed"] == 5
    assert m["config"]["parameters"]["paths"] == 100
    assert m["config"]["parameters"]["steps"] == "16,32,64"
    rows = (out / "convergence.csv").read_text().splitlines()
    assert rows[0] == "dt,strong_err,weak_err" and len(rows) == 4


def test_run_from_config_alone(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    out = tmp_path / "o"
    cfg.write_text(json.dumps({"experiment": "poisson", "seed": 9, "output_dir": str(out),
                               "parameters": {"paths": 50}}))
    code, _, err = run_cli(["run", "--config", str(cfg)], capsys)
    assert code == 0, err
    m = json.loads((out / "manifest.json").read_text())
    assert m["experiment"] == "poisson" and m["config"]["seed"] == 9


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"experiment": "sde",\n "parameters": {"nope": 1}}')
    assert run_cli(["sde", "--config", str(bad), "--out", str(tmp_path)], capsys)[0] == 1
    wrong = tmp_path / "wrong.json"
    wrong.write_text('{"experiment": "codec"}')
    assert run_cli(["sde", "--config", str(wrong), "--out", str(tmp_path)], capsys)[0] == 1
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"experiment": "teleport"}')
    assert run_cli(["run", "--config", str(unknown)], capsys)[0] == 1
    broken = tmp_path / "broken.toml"
    broken.write_text("seed = = 3\n")
    code, _, err = run_cli(["sde", "--config", str(broken), "--out", str(tmp_path)], capsys)
    assert code == 1 and "TOML" in err


def test_version(capsys):
    code, out, _ = run_cli(["--version"], capsys)
    assert code == 0 and "0.1.0" in out


# -- selftest ------------------------------------------------------------------------


def test_selftest_passes(capsys):
    code, out, err = run_cli(["selftest"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["pass"] is True
    assert err.count("PASS") == 4


def _schema(obj):
    if isinstance(obj, dict):
        return {k: _schema(v) for k, v in obj.items()}
    return type(obj).__name__


def test_selftest_golden_schema():
    report = run_selftest()
    golden = json.loads((Path(__file__).parent / "data" / "selftest_schema.json").read_text())
    assert _schema(report) == golden
    # stable JSON: identical text across calls
    assert json.dumps(report, sort_keys=True) == json.dumps(run_selftest(), sort_keys=True)


@pytest.mark.parametrize("name, group", [
    ("COMPLETENESS_TOL", "projector_axioms"),
    ("IDEMPOTENT_TOL", "projector_axioms"),
    ("TRACE_TOL", "entropy_bounds"),
    ("COMPLETENESS_TOL", "semigroup_law"),
])
def test_selftest_mutation(monkeypatch, capsys, name, group):
    monkeypatch.setattr(tolerances, name, 1e-30)
    code, out, err = run_cli(["selftest"], capsys)
    report = json.loads(out)
    assert code != 0 and report["pass"] is False
    assert report["groups"][group]["pass"] is False
    assert f"FAIL {group}" in err


# -- determinism ----------------------------------------------------------------------


def _snapshot(out):
    files = {}
    for p in sorted(out.iterdir()):
        text = p.read_text()
        if p.name == "manifest.json":
            m = json.loads(text)
            m.pop(TIMESTAMP_KEY)
            text = json.dumps(m, sort_keys=True)
        files[p.name] = text
    return files


@pytest.mark.parametrize("args", [
    ["spectral", "--dim", "5", "--trials", "30"],
    ["poisson", "--paths", "200"],
    ["holevo", "--pairs", "2", "--restarts", "2"],
    ["sde", "--paths", "300"],
    ["codec", "--intensities", "250,500", "--seeds", "2", "--resolution", "300", "--rounds", "2"],
])
def test_rerun_byte_identical(tmp_path, capsys, args):
    out = tmp_path / "o"
    full = args + ["--seed", "123", "--out", str(out)]
    assert run_cli(full, capsys)[0] == 0
    first = _snapshot(out)
    assert run_cli(full, capsys)[0] == 0
    assert _snapshot(out) == first
