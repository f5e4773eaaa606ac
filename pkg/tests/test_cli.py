from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from tdwfpinn.cli import main
from tdwfpinn.neuralfield import load_checkpoint

TINY_INI = """\
[problem]
name = dw_eq19
alpha = 1.5

[network]
widths = 2,6,6,1

[estimator]
scheme = gj2
m = 4

[training]
iterations = 2
epochs = 3
n_interior = 16
n_boundary = 4
n_initial = 4
test_grid = 11
"""


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_gj_table(capsys):
    code, out, _ = run(["gj-table", "--alpha", "1.5", "--m", "1"], capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == ["index", "node", "weight"]
    assert float(r[1][1]) == pytest.approx(1 / 3, rel=1e-15)
    assert float(r[1][2]) == pytest.approx(2.0, rel=1e-15)
    # 17 significant digits
    assert len(r[1][1].split("e")[0].replace(".", "").lstrip("-")) == 17


def test_gj_table_to_file(tmp_path, capsys):
    path = tmp_path / "rule.csv"
    assert main(["gj-table", "--alpha", "1.2", "--m", "5", "--output", str(path)]) == 0
    r = rows(path.read_text())
    assert len(r) == 6
    assert sum(float(w) for _, _, w in r[1:]) == pytest.approx(1 / 0.8, rel=1e-13)


def test_validate_derivative(capsys):
    code, out, _ = run(["validate-derivative", "--scheme", "gj2", "--m", "16"], capsys)
    assert code == 0
    r = rows(out)
    assert r[0][:3] == ["scheme", "alpha", "M"]
    assert float(r[1][-1]) <= 1e-5


def test_validate_alpha_sweep(capsys):
    code, out, _ = run(["validate-derivative", "--sweep", "alpha", "--m", "80"], capsys)
    assert code == 0
    assert len(rows(out)) == 101


def test_sweep(capsys):
    code, out, _ = run(["sweep", "--axis", "alpha", "--from", "1.01", "--to", "1.99", "--points", "100",
                        "--m", "32"], capsys)
    assert code == 0
    r = rows(out)
    assert len(r) == 101
    assert float(r[1][1]) == pytest.approx(1.01) and float(r[-1][1]) == pytest.approx(1.99)


def test_input_errors_exit_2(capsys):
    code, _, err = run(["gj-table", "--alpha", "2.5", "--m", "4"], capsys)
    assert code == 2
    assert err.startswith("error: kind=input ")
    code, _, err = run(["train"], capsys)
    assert code == 2 and "kind=input" in err
    code, _, err = run(["train", "--preset", "missing"], capsys)
    assert code == 2 and "op=get_preset" in err


def test_config_error_names_file_and_line(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(TINY_INI.replace("m = 4", "m = four"))
    code, _, err = run(["train", "--config", str(path)], capsys)
    assert code == 2
    assert f"{path}:10: [estimator] m:" in err


def test_list_presets(capsys):
    code, out, _ = run(["train", "--list-presets"], capsys)
    assert code == 0
    assert "table1-small-gj2-m16-reduced" in out


def test_train_and_evaluate(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TDWFPINN_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(TINY_INI)
    code, out, err = run(["train", "--config", str(cfg)], capsys)
    assert code == 0, err
    rundir = tmp_path / "tiny"
    assert out.strip() == str(rundir)
    manifest = json.loads((rundir / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert sorted(manifest["outputs"]) == ["checkpoint.txt", "config.ini", "history.csv", "points.csv"]
    assert "iteration 2:" in err
    hist = rows((rundir / "history.csv").read_text())
    assert len(hist) == 3

    net, it = load_checkpoint(rundir / "checkpoint.txt")
    assert it == 2 and net.layer_widths == (2, 6, 6, 1)

    code, out, _ = run(["evaluate", "--checkpoint", str(rundir / "checkpoint.txt"),
                        "--config", str(rundir / "config.ini"), "--grid", "5"], capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == ["t", "x", "u_pred", "u_exact", "abs_err"]
    assert len(r) == 26
    vals = np.array(r[1:], dtype=float)
    np.testing.assert_allclose(vals[:, 4], np.abs(vals[:, 2] - vals[:, 3]))


def test_train_overrides_and_seed(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TDWFPINN_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(TINY_INI.replace("gj2", "mc2"))
    code, _, err = run(["train", "--config", str(cfg), "--iterations", "1", "--epochs", "1",
                        "--seed", "7", "--output", "o", "--quiet"], capsys)
    assert code == 0 and err == ""
    text = (tmp_path / "o" / "config.ini").read_text()
    assert "iterations = 1" in text
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seeds"] == {"training": 7, "estimator": 7}


def test_evaluate_burgers_uses_reference(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TDWFPINN_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "b.ini"
    cfg.write_text(TINY_INI.replace("dw_eq19", "burgers_eq26").replace("alpha = 1.5", "alpha = 1.8")
                   .replace("iterations = 2", "iterations = 1"))
    assert main(["train", "--config", str(cfg), "--quiet"]) == 0
    capsys.readouterr()
    code, out, _ = run(["evaluate", "--checkpoint", str(tmp_path / "b" / "checkpoint.txt"),
                        "--problem", "burgers_eq26", "--alpha", "1.8", "--grid", "3",
                        "--ref-nx", "64", "--ref-nt", "20"], capsys)
    assert code == 0
    vals = np.array(rows(out)[1:], dtype=float)
    np.testing.assert_allclose(vals[:3, 3], -np.sin(np.pi * vals[:3, 1]), atol=1e-12)


def test_evaluate_bad_checkpoint(tmp_path, capsys):
    path = tmp_path / "x.txt"
    path.write_text("junk\n")
    code, _, err = run(["evaluate", "--checkpoint", str(path)], capsys)
    assert code == 2 and "op=load_checkpoint" in err


def test_module_entry_point_serial():
    proc = subprocess.run(
        [sys.executable, "-m", "tdwfpinn", "--serial", "gj-table", "--alpha", "1.5", "--m", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(proc.stdout.splitlines()) == 3
