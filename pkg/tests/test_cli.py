import csv
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from ocfgames.cli import CSV_HEADER, ConfigError, _scenario_runs, _solver_config, load_config, main, parse_seeds
from ocfgames.scenarios.hetnet import HetNetConfig
from ocfgames.scenarios.sensing import SensingConfig


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_example_default(capsys):
    assert main(["example"]) == 0
    out = capsys.readouterr().out
    assert "payoffs=(1200, 1200, 1000) welfare=3400" in out
    assert "payoffs=(1600, 1600, 1600) welfare=4800" in out
    assert "check: ok" in out


def test_example_equal_division(capsys):
    assert main(["example", "--division", "equal"]) == 0
    out = capsys.readouterr().out
    assert "welfare=4800" in out
    assert "payoffs=(1600, 1600, 1600) welfare=4800" not in out


@pytest.mark.parametrize("kind", ["conservative", "refined"])
def test_example_other_arbitration(kind, capsys):
    assert main(["example", "--arbitration", kind]) == 0
    assert "welfare trace:" in capsys.readouterr().out


def test_certify_round_trip(tmp_path, capsys):
    assert main(["example", "--dump", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["certify", str(tmp_path / "fig1b.json")]) == 0
    assert "o-stable" in capsys.readouterr().out
    assert main(["certify", str(tmp_path / "fig1a.json")]) == 1
    assert "deviators=" in capsys.readouterr().out


def test_certify_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "ocfgames.instance/1", "game": {}}')
    assert main(["certify", str(bad)]) == 2
    assert main(["certify", str(tmp_path / "missing.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["hetnet", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert "config file not found" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    ["scenario: [1, 2]", "unknown: 1", "scenario: {n_su: 0}", "solver: {max_iterations: 0}", "seeds: []", "a: [b"],
)
def test_bad_configs_exit_2(tmp_path, text):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(text)
    assert main(["sensing", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2
    assert not (tmp_path / "o.csv").exists()


def test_bad_arguments_exit_2():
    assert main(["nonsense"]) == 2
    assert main(["sensing", "--seeds", "4-1"]) == 2


def test_sensing_rows_and_determinism(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("scenario:\n  n_su: 8\nseeds: [0, 1, 2, 3, 4]\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sensing", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["sensing", "--config", str(cfg), "--out", str(b)]) == 0
    rows = _rows(a)
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 15
    assert a.read_bytes() == b.read_bytes()
    assert {r[2] for r in rows[1:]} == {"local", "nonoverlapping", "ocf"}


def test_hetnet_sweep_labels(tmp_path):
    cfg = tmp_path / "h.yaml"
    cfg.write_text("scenario:\n  traffic_load: 0.5\nsweep:\n  n_sbs: [4, 6]\nseeds: 3\n")
    out = tmp_path / "h.csv"
    assert main(["hetnet", "--config", str(cfg), "--out", str(out)]) == 0
    rows = _rows(out)[1:]
    assert [r[0] for r in rows] == ["hetnet[n_sbs=4]"] * 3 + ["hetnet[n_sbs=6]"] * 3
    assert all(r[6] == "0.000" for r in rows)


def test_seeds_flag_overrides(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["sensing", "--seeds", "2,5", "--out", str(out)]) == 0
    assert sorted({r[1] for r in _rows(out)[1:]}) == ["2", "5"]


def test_parse_seeds():
    assert parse_seeds("0-2,7") == [0, 1, 2, 7]
    with pytest.raises(ConfigError):
        parse_seeds("")


def test_load_config_none():
    assert load_config(None) == {}


def test_console_script():
    exe = shutil.which("ocf")
    cmd = [exe, "example"] if exe else [sys.executable, "-m", "ocfgames.cli", "example"]
    res = subprocess.run(cmd, capture_output=True, text=True, timeout=60)
    assert res.returncode == 0
    assert "4800" in res.stdout


@pytest.mark.parametrize("name", ["hetnet_density.yaml", "sensing_sweep.yaml"])
def test_shipped_configs_validate(name):
    path = Path(__file__).parent.parent / "configs" / name
    doc = load_config(str(path))
    cls = HetNetConfig if name.startswith("hetnet") else SensingConfig
    _solver_config(doc, None)
    for _, kwargs in _scenario_runs(cls, doc):
        cls(**kwargs, seed=0)


def test_arbitration_flag_reaches_scenarios(tmp_path):
    opt, cons = tmp_path / "opt.csv", tmp_path / "cons.csv"
    assert main(["sensing", "--seeds", "0", "--out", str(opt)]) == 0
    assert main(["sensing", "--seeds", "0", "--arbitration", "conservative", "--out", str(cons)]) == 0
    assert _rows(opt)[3] != _rows(cons)[3]
