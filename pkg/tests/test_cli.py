import csv
import json
import subprocess
import sys

import pytest

from ergobandit import cli, harness
from ergobandit.report import InternalConsistencyError

BASE = {"schedule": {"kind": "rational", "c": 2},
        "arms": {"A": {"kind": "iid", "theta": 0.7}, "B": {"kind": "iid", "theta": 0.4}},
        "x0": 0.5, "horizon": 3000, "replicas": 16, "seed": 1,
        "verify": {"pairs": 1000, "window": 1000}}


@pytest.fixture
def config(tmp_path):
    def make(**over):
        p = tmp_path / "config.json"
        p.write_text(json.dumps({**BASE, **over}))
        return str(p)
    return make


def test_run_writes_trajectory_and_report(config, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--config", config(stride=500), "--out", str(out)]) == 0
    rows = list(csv.reader((out / "trajectory.csv").open(newline="")))
    assert tuple(rows[0]) == ("n", "X", "M", "Lambda", "drift", "S", "S_B", "Y_B", "T_B", "R_n")
    assert [r[0] for r in rows[1:]] == ["0", "500", "1000", "1500", "2000", "2500", "3000"]
    rep = json.loads((out / "report.json").read_text())
    assert rep["invariants"]["decomposition_residual"] <= 1e-8
    assert {r["condition_name"] for r in rep["reports"]} >= {"sf_monotone", "esta_decompsum"}


def test_sweep_byte_identical_across_workers(config, tmp_path):
    c = config()
    outs = []
    for w in (1, 8, 8):
        o = tmp_path / f"w{w}_{len(outs)}"
        assert cli.main(["sweep", "--config", c, "--out", str(o), "--workers", str(w)]) == 0
        outs.append(o)
    for name in ("finals.csv", "summary.json"):
        blobs = {(o / name).read_bytes() for o in outs}
        assert len(blobs) == 1, name
    assert "wall_time_s" in json.loads((outs[0] / "timing.json").read_text())


def test_seed_flag_overrides(config, tmp_path):
    c = config()
    cli.main(["sweep", "--config", c, "--out", str(tmp_path / "a")])
    cli.main(["sweep", "--config", c, "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a/finals.csv").read_bytes() != (tmp_path / "b/finals.csv").read_bytes()


def test_check_strict_exit_code(config, tmp_path):
    good = config(arms={"A": {"kind": "rotation", "theta": 0.7},
                        "B": {"kind": "rotation", "theta": 0.4}})
    assert cli.main(["check", "--config", good, "--out", str(tmp_path), "--strict"]) == 0
    body = json.loads((tmp_path / "checks.json").read_text())
    assert body["reports"] and all("verdict" in r for r in body["reports"])
    bad = config(schedule={"kind": "rational", "c": 5}, horizon=20_000)
    assert cli.main(["check", "--config", bad, "--out", str(tmp_path)]) == 0
    assert cli.main(["check", "--config", bad, "--out", str(tmp_path), "--strict"]) == 4


def test_mean_field(config, tmp_path):
    assert cli.main(["mean-field", "--config", config(stride=1000), "--out", str(tmp_path)]) == 0
    rows = list(csv.reader((tmp_path / "mean_field.csv").open(newline="")))
    assert rows[0] == ["n", "x"] and rows[1] == ["0", "0.5"] and len(rows) == 5


def test_config_errors_exit_2(config, tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert cli.main(["run", "--config", config(x0=2.0), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        cli.main(["run"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["launch", "--config", "x"])
    assert e.value.code == 2


def test_scripted_overrun_exit_2(tmp_path):
    (tmp_path / "a.txt").write_text("1" * 10)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**BASE, "horizon": 20,
                             "arms": {"A": {"kind": "scripted", "path": "a.txt", "theta": 0.5},
                                      "B": {"kind": "rotation", "theta": 0.4}}}))
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_internal_error_exit_3(config, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise InternalConsistencyError("residual 1e-3 at step 7")
    monkeypatch.setattr(harness, "simulate", boom)
    assert cli.main(["run", "--config", config(), "--out", str(tmp_path)]) == 3


def test_env_output_dir(config, tmp_path, monkeypatch):
    monkeypatch.setenv("ERGOBANDIT_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["mean-field", "--config", config()]) == 0
    assert (tmp_path / "env/mean_field.csv").exists()


def test_module_entry_point(config, tmp_path):
    r = subprocess.run([sys.executable, "-m", "ergobandit", "mean-field", "--config",
                        config(horizon=100), "--out", str(tmp_path)], capture_output=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "ergobandit", "--help"], capture_output=True,
                       text=True)
    assert "mean-field" in r.stdout
