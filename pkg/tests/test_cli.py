import csv
import json

import pytest

from leaklab import cli
from leaklab.scenarios import ScenarioConfig, ScenarioKind


def write_config(path, **fields):
    path.write_text(json.dumps(ScenarioConfig(**fields).to_dict()))
    return path


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def dual_file(tmp_path):
    return write_config(tmp_path / "dual.json", scenario_kind=ScenarioKind.BYZ_DUAL_ACTIVE,
                        p0=0.5, beta0=0.33, horizon=520)


def test_parse_axis_range_and_list():
    assert cli.parse_axis("beta0=0.1:0.3:0.1") == ("beta0", [0.1, 0.2, 0.3])
    assert cli.parse_axis("horizon=10:30:10") == ("horizon", [10, 20, 30])
    assert cli.parse_axis("p0=0.4,0.6") == ("p0", [0.4, 0.6])


@pytest.mark.parametrize("text", ["beta0", "beta0=", "beta0=1:2", "beta0=0.3:0.1:0.1", "beta0=a:b:c",
                                  "beta0=0:1:0"])
def test_parse_axis_rejects(text):
    with pytest.raises(Exception):
        cli.parse_axis(text)


def test_reproduce_is_byte_stable(tmp_path, capsys):
    assert cli.main(["reproduce", "Table2", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["reproduce", "Table2", "--out", str(tmp_path / "b")]) == 0
    a, b = read_tree(tmp_path / "a"), read_tree(tmp_path / "b")
    assert a and a == b
    assert "PASS" in capsys.readouterr().out


def test_reproduce_all_writes_every_target(tmp_path):
    assert cli.main(["reproduce", "all", "--out", str(tmp_path)]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert len([n for n in names if n.endswith(".csv")]) >= 8


def test_simulate_violation_exit_code(tmp_path, dual_file, capsys):
    out = tmp_path / "run"
    assert cli.main(["simulate", str(dual_file), "--out", str(out)]) == 10
    summary = json.loads(capsys.readouterr().out)
    assert summary["verdict"]["violated"]
    assert {p.name for p in out.iterdir()} >= {"metrics.csv", "verdict.json", "config.json", "events.jsonl"}


def test_simulate_over_third_exit_code(tmp_path):
    f = write_config(tmp_path / "delay.json", scenario_kind=ScenarioKind.BYZ_SEMI_ACTIVE_DELAY,
                     p0=0.5, beta0=0.25, horizon=4700)
    assert cli.main(["simulate", str(f), "--out", str(tmp_path / "run")]) == 11


def test_simulate_clean_exit(tmp_path, dual_file):
    assert cli.main(["simulate", str(dual_file), "--out", str(tmp_path / "r"), "--set", "horizon=100"]) == 0


def test_simulate_reports_bad_field(tmp_path, dual_file, capsys):
    assert cli.main(["simulate", str(dual_file), "--out", str(tmp_path / "r"), "--set", "beta0=0.5"]) == 2
    assert "error: beta0:" in capsys.readouterr().err


def test_simulate_reports_bad_json(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    assert cli.main(["simulate", str(f), "--out", str(tmp_path / "r")]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_simulate_seed_override_is_recorded(tmp_path, dual_file):
    cli.main(["simulate", str(dual_file), "--out", str(tmp_path / "r"), "--seed", "77"])
    assert json.loads((tmp_path / "r" / "config.json").read_text())["seed"] == 77


def test_sweep_is_deterministic_across_workers(tmp_path, dual_file, monkeypatch):
    args = ["sweep", "--axis", "beta0=0.2,0.33", "--axis", "p0=0.4:0.5:0.1", "--template", str(dual_file),
            "--sample-every", "50"]
    monkeypatch.setenv("LEAKLAB_THREADS", "1")
    assert cli.main(args + ["--out", str(tmp_path / "one")]) == 0
    monkeypatch.setenv("LEAKLAB_THREADS", "3")
    assert cli.main(args + ["--out", str(tmp_path / "many")]) == 0
    assert read_tree(tmp_path / "one") == read_tree(tmp_path / "many")
    with open(tmp_path / "one" / "cells.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4


def test_single_cell_sweep_matches_simulate(tmp_path, dual_file):
    assert cli.main(["sweep", "--axis", "beta0=0.33", "--template", str(dual_file),
                     "--out", str(tmp_path / "s"), "--seed", "5"]) == 0
    with open(tmp_path / "s" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    seed = rows[0]["seed"]
    cli.main(["simulate", str(dual_file), "--out", str(tmp_path / "m"), "--seed", seed])
    with open(tmp_path / "m" / "metrics.csv") as fh:
        single = list(csv.DictReader(fh))
    assert len(rows) == len(single)
    for a, b in zip(rows, single):
        assert all(a[k] == b[k] for k in b)


def test_sweep_refuses_too_many_cells(tmp_path, dual_file, capsys):
    assert cli.main(["sweep", "--axis", "beta0=0:0.3:0.01", "--axis", "p0=0.1:0.9:0.01",
                     "--template", str(dual_file), "--out", str(tmp_path / "s"), "--max-cells", "100"]) == 2
    assert "cap" in capsys.readouterr().err
    assert not (tmp_path / "s").exists()


def test_sweep_reports_invalid_cell(tmp_path, dual_file, capsys):
    assert cli.main(["sweep", "--axis", "beta0=0.2,0.4", "--template", str(dual_file),
                     "--out", str(tmp_path / "s")]) == 2
    assert "cell 1 (beta0=0.4): beta0" in capsys.readouterr().err


def test_bad_axis_is_usage_error(tmp_path, dual_file):
    with pytest.raises(SystemExit) as info:
        cli.main(["sweep", "--axis", "beta0=1:2", "--template", str(dual_file), "--out", str(tmp_path)])
    assert info.value.code == 2
