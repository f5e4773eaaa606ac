from __future__ import annotations

import json

import pytest

from tdwfpinn.config import (
    ConfigError,
    RunManifest,
    load_run_config,
    output_root,
    parse_run_config,
    write_json_atomic,
)
from tdwfpinn.experiments import PRESETS, get_preset
from tdwfpinn.config import RunConfig

MINIMAL = """\
[problem]
name = dw_eq24
alpha = 1.25
k_mode = 2
lambda = 4
t_final = 2
"""


def test_defaults():
    rc = parse_run_config(MINIMAL)
    assert rc.problem_args == {"alpha": 1.25, "T": 2.0, "k": 2, "lam": 4.0}
    assert rc.train.estimator.scheme.name.lower().startswith("gj")
    assert rc.train.counts == (5000, 1000, 1000)
    p = rc.make_problem()
    assert p.exact.k == 2 and p.T == 2.0


@pytest.mark.parametrize("name", ["table1-small-gj2-m16-reduced", "table2-a1.75-k1-l1-gj2-m16",
                                  "burgers-a1.1-mc2-rad-desk", "table3-a1.5-k2-l4-mc2-m80"])
def test_round_trip_presets(name):
    p = get_preset(name)
    rc = RunConfig(p.problem, dict(p.problem_args), p.train)
    back = parse_run_config(rc.to_ini())
    assert back.train == rc.train
    assert back.make_problem() == rc.make_problem()
    assert back.to_ini() == rc.to_ini()


def test_every_preset_builds():
    assert len(PRESETS) > 100
    for p in PRESETS.values():
        assert p.make_problem().alpha == p.train.estimator.alpha


def test_unknown_preset():
    with pytest.raises(KeyError):
        get_preset("nope")


def error_of(text):
    with pytest.raises(ConfigError) as exc:
        parse_run_config(text, "run.ini")
    return str(exc.value)


def test_error_reports_line_and_key():
    msg = error_of(MINIMAL + "\n[training]\nlr = fast\n")
    assert msg.startswith("run.ini:9: [training] lr:")


def test_unknown_key_and_section():
    assert "run.ini:3: [problem] colour: unknown key" in error_of("[problem]\nname = dw_eq19\ncolour = red\n")
    assert "unknown section [extras]" in error_of(MINIMAL + "[extras]\na = 1\n")


def test_missing_problem_name():
    assert "[problem] name: required" in error_of("[problem]\nalpha = 1.5\n")


def test_invalid_values_are_reported_by_key():
    assert "[estimator] scheme" in error_of(MINIMAL + "[estimator]\nscheme = simpson\n")
    assert "[network] activation" in error_of(MINIMAL + "[network]\nactivation = relu\n")
    assert "[training]" in error_of(MINIMAL + "[training]\nepochs = 0\n")
    assert "[problem] name" in error_of("[problem]\nname = dw_eq19\nalpha = 2.5\n")
    assert "[output] points" in error_of(MINIMAL + "[output]\npoints = perhaps\n")


def test_syntax_error():
    assert error_of("no section header\n").startswith("run.ini:")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.ini")


def test_output_root(monkeypatch, tmp_path):
    monkeypatch.delenv("TDWFPINN_OUTPUT_ROOT", raising=False)
    assert str(output_root()) == "runs"
    monkeypatch.setenv("TDWFPINN_OUTPUT_ROOT", str(tmp_path))
    assert output_root() == tmp_path


def test_manifest(tmp_path):
    m = RunManifest("train", MINIMAL, {"training": 1})
    assert m.status == "running"
    m.finish()
    path = m.write(tmp_path)
    data = json.loads(path.read_text())
    assert data["status"] == "ok" and data["seeds"] == {"training": 1} and data["finished"]
    assert list(tmp_path.iterdir()) == [path]


def test_write_json_atomic_leaves_no_temp_on_failure(tmp_path):
    with pytest.raises(TypeError):
        write_json_atomic(tmp_path / "x.json", {"bad": object()})
    assert list(tmp_path.iterdir()) == []
