import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from regulus.cartan import fundamental_weights, kappa, simple_roots
from regulus.cli import main
from regulus.controls import CONTROLS
from regulus.groups import gallery_group, word_ball
from regulus.matrixcore import normalize
from regulus.serialize import write_sequence


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def control_file(tmp_path):
    def make(name, n=200):
        path = tmp_path / f"{name}.jsonl"
        write_sequence(path, CONTROLS[name](n))
        return path
    return make


def test_kappa_identity_rows_are_zero(tmp_path, capsys):
    path = tmp_path / "id.jsonl"
    path.write_text("[[1,0,0],[0,1,0],[0,0,1]]\n" * 3)
    code, out, _ = run(capsys, "kappa", path, "--out-dir", tmp_path)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["index", "kappa_1", "kappa_2", "kappa_3", "alpha_1", "alpha_2", "omega_1", "omega_2"]
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[1:])
    assert (tmp_path / "kappa.csv").read_text() == out


def test_kappa_diagonal_row(tmp_path, capsys):
    e = np.e
    path = tmp_path / "diag.jsonl"
    path.write_text(json.dumps([[e ** 2, 0, 0], [0, 1 / e, 0], [0, 0, 1 / e]]) + "\n")
    _, out, _ = run(capsys, "kappa", path, "--out-dir", tmp_path)
    row = [float(v) for v in list(csv.reader(io.StringIO(out)))[1]]
    assert np.allclose(row[1:], [2, -1, -1, 3, 0, 2, 1], atol=1e-9)


def test_kappa_matches_library(tmp_path, capsys, rng):
    mats = [rng.normal(size=(3, 3)) for _ in range(100)]
    path = tmp_path / "rand.jsonl"
    path.write_text("".join(json.dumps(m.tolist()) + "\n" for m in mats))
    _, out, _ = run(capsys, "kappa", path, "--out-dir", tmp_path)
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert len(rows) == 100
    for m, r in zip(mats, rows):
        k = kappa(normalize(m)).coords
        expect = np.concatenate([k, simple_roots(k), fundamental_weights(k)])
        assert np.allclose([float(v) for v in r[1:]], expect, atol=1e-12)


@pytest.mark.parametrize("name, code", [("flat", 0), ("detour", 0), ("unipotent", 2), ("wall", 2)])
def test_classify_exit_codes(control_file, tmp_path, capsys, name, code):
    out_dir = tmp_path / name
    got, out, _ = run(capsys, "classify", control_file(name), "--theta", "1,2", "--out-dir", out_dir)
    assert got == code
    assert out.strip() == f"morse: {'pass' if code == 0 else 'fail'}"
    report = json.loads((out_dir / "verdict.json").read_text())
    assert report["passed"] is (code == 0) and report["theta"] == [1, 2]
    header = (out_dir / "diagnostics.csv").read_text().splitlines()[0]
    assert header == "n,dist_from_start,min_root_gap,deficit"


def test_classify_ur_and_path_modes(control_file, tmp_path, capsys):
    path = control_file("flat", 60)
    assert run(capsys, "classify", path, "--mode", "ur", "--out-dir", tmp_path)[0] == 0
    assert run(capsys, "classify", path, "--mode", "path", "--out-dir", tmp_path)[0] == 0
    assert json.loads((tmp_path / "verdict.json").read_text())["mode"] == "path"


def test_malformed_input(tmp_path, capsys):
    path = tmp_path / "bad.jsonl"
    path.write_text("[[1,0],[0,1]]\n[[1,0],[0,1]\n")
    code, _, err = run(capsys, "classify", path, "--out-dir", tmp_path)
    assert code == 1
    assert "line 2" in err and "invalid JSON" in err


def test_bad_arguments_exit_one(tmp_path, capsys):
    assert run(capsys, "kappa")[0] == 1
    assert run(capsys, "nonsense")[0] == 1
    assert run(capsys, "gallery", "--threads", "0", "--out-dir", tmp_path)[0] == 1
    assert run(capsys, "hilbert-pipeline", "--T", "0", "--out-dir", tmp_path)[0] == 1
    assert run(capsys, "gallery", "no-such-group", "--out-dir", tmp_path)[0] == 1


def test_weyl_verify(control_file, tmp_path, capsys):
    code, out, _ = run(capsys, "weyl-verify", control_file("flat", 80), "--out-dir", tmp_path / "f")
    assert code == 0 and out.startswith("weyl-verify: pass")
    lines = (tmp_path / "f" / "cone_distance.csv").read_text().splitlines()
    assert lines[0] == "n,dist_to_tip,bound" and len(lines) == 81
    assert "limit_flag" in json.loads((tmp_path / "f" / "report.json").read_text())
    code, _, _ = run(capsys, "weyl-verify", control_file("wall-drift", 120), "--out-dir", tmp_path / "w")
    assert code == 2


def test_hilbert_pipeline(tmp_path, capsys):
    code, out, _ = run(capsys, "hilbert-pipeline", "--T", "40", "--out-dir", tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "pipeline.json").read_text())
    assert rep["status"] == "pass"
    assert (tmp_path / "intervals.csv").read_text().splitlines()[0] == "start,end"


def test_poincare_zero_column_counts_ball(tmp_path, capsys):
    code, _, _ = run(capsys, "poincare", "--radii", "0..4", "--out-dir", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "partial_sums.csv").read_text())))
    ball = word_ball(gallery_group("diagonal-schottky"), 4)
    for r in rows:
        if float(r["s"]) == 0.0:
            R = int(r["radius"])
            assert float(r["partial_sum"]) == sum(1 for n in ball if n.length <= R)
    assert "bracket" in json.loads((tmp_path / "bracket.json").read_text())


def test_poincare_trivial_group(tmp_path, capsys):
    code, _, _ = run(capsys, "poincare", "--group", "trivial", "--out-dir", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "partial_sums.csv").read_text())))
    assert all(float(r["partial_sum"]) == 1.0 for r in rows)
    assert json.loads((tmp_path / "bracket.json").read_text())["bracket"]["reason"]


def test_gallery(tmp_path, capsys):
    code, out, _ = run(capsys, "gallery")
    assert code == 0 and len(out.strip().splitlines()) == 9
    code, _, _ = run(capsys, "gallery", "klein-schottky", "--ball", "2", "--out-dir", tmp_path)
    assert code == 0
    assert len((tmp_path / "klein-schottky_ball.jsonl").read_text().splitlines()) == 17
    assert json.loads((tmp_path / "klein-schottky.json").read_text())


def test_config_defaults_and_precedence(control_file, tmp_path, capsys):
    path = control_file("flat", 60)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mode": "ur", "c": 0.2}))
    run(capsys, "classify", path, "--config", cfg, "--out-dir", tmp_path)
    assert json.loads((tmp_path / "verdict.json").read_text())["mode"] == "ur"
    run(capsys, "classify", path, "--config", cfg, "--mode", "morse", "--out-dir", tmp_path)
    assert json.loads((tmp_path / "verdict.json").read_text())["mode"] == "morse"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "classify", path, "--config", cfg, "--out-dir", tmp_path)[0] == 1


@pytest.mark.parametrize("argv", [
    ["classify", "{seq}", "--theta", "1,2"],
    ["weyl-verify", "{seq}"],
    ["poincare", "--radii", "0..4"],
])
def test_thread_count_does_not_change_output(control_file, tmp_path, capsys, argv):
    seq = control_file("detour", 120)
    outputs = []
    for threads in (1, 8):
        out_dir = tmp_path / f"t{threads}"
        args = [a.replace("{seq}", str(seq)) for a in argv]
        run(capsys, *args, "--threads", threads, "--out-dir", out_dir)
        outputs.append({p.name: p.read_bytes() for p in sorted(out_dir.iterdir())})
    assert outputs[0] and outputs[0] == outputs[1]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "regulus.cli", "gallery"], capture_output=True, text=True)
    assert res.returncode == 0 and "klein-schottky" in res.stdout
