import json
import subprocess
import sys

import numpy as np
import pytest

from amblab import io, tf
from amblab.cli import main
from amblab.tf import TimeGrid

CONFIG = {
    "grid": {"n": 64, "dx": 0.125},
    "seed": 1,
    "objective": {"kind": "ambiguity_lp", "p": 2, "domain": {"variant": "ball", "center": [0, 0], "r": 2}},
    "optimizer": {"method": "ProjGrad", "max_iters": 200},
}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def gaussian_csv(tmp_path):
    path = tmp_path / "g.csv"
    io.write_signal(path, tf.gaussian(TimeGrid(64, 0.2)))
    return path


def test_ambiguity_command(tmp_path, gaussian_csv):
    out = tmp_path / "out"
    assert main(["ambiguity", str(gaussian_csv), "--out", str(out), "--quiet"]) == 0
    F = io.read_tfarray(out / "ambiguity.csv")
    assert F.abs()[32, 32] == pytest.approx(tf.gaussian(TimeGrid(64, 0.2)).norm_sq(), abs=1e-10)
    assert (out / "manifest.json").exists()


def test_ambiguity_malformed(tmp_path, gaussian_csv, capsys):
    lines = gaussian_csv.read_text().splitlines()
    lines[3] = "1,2"
    gaussian_csv.write_text("\n".join(lines))
    assert main(["ambiguity", str(gaussian_csv), "--out", str(tmp_path)]) == 3
    assert "g.csv:4:" in capsys.readouterr().err


def test_ambiguity_sidecar_mismatch(tmp_path, gaussian_csv):
    io.sidecar_path(gaussian_csv).write_text('{"n": 128, "dx": 0.2}')
    assert main(["ambiguity", str(gaussian_csv), "--out", str(tmp_path)]) == 3


def test_ambiguity_grid_flag_conflict(tmp_path, gaussian_csv):
    assert main(["ambiguity", str(gaussian_csv), "--grid-n", "32", "--out", str(tmp_path)]) == 3


def test_missing_input_is_io_error(tmp_path):
    assert main(["ambiguity", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 2


def test_stft_command(tmp_path, gaussian_csv):
    assert main(["stft", str(gaussian_csv), "--out", str(tmp_path / "s"), "--quiet"]) == 0
    assert io.read_tfarray(tmp_path / "s" / "stft.csv").values.shape == (64, 64)


def test_optimize_monotone_and_deterministic(tmp_path):
    cfg = write_config(tmp_path, CONFIG)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "b"), "--quiet"]) == 0
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    tr = rep["objective_trace"]
    assert all(b >= a - 1e-12 for a, b in zip(tr, tr[1:]))
    for name in ("report.json", "signal.csv", "signal.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert set(man) == {"command", "config_sha256", "versions", "wall_time_s"}


def test_optimize_seed_flag_changes_run(tmp_path):
    cfg = write_config(tmp_path, {**CONFIG, "optimizer": {"max_iters": 5}})
    main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "a"), "--quiet"])
    main(["optimize", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "b"), "--quiet"])
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert (ra["seed"], rb["seed"]) == (1, 9)
    assert ra["objective_trace"] != rb["objective_trace"]


@pytest.mark.parametrize("method,objective", [
    ("SelfConsistent", CONFIG["objective"]),
    ("PowerIter", {"kind": "fixed_window_lp", "p": 2, "domain": {"variant": "ball", "r": 1.5}}),
])
def test_optimize_other_methods(tmp_path, method, objective):
    cfg = write_config(tmp_path, {**CONFIG, "objective": objective, "optimizer": {"method": method}})
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["method"] == method and rep["final_objective"] > 0.9


@pytest.mark.parametrize("mutate", [
    lambda c: c["objective"].update(kind="bogus"),
    lambda c: c["objective"]["domain"].update(variant="triangle"),
    lambda c: c.update(extra=1),
    lambda c: c["optimizer"].update(step=2),
    lambda c: c.update(seed="x"),
    lambda c: c["grid"].update(n=63),
])
def test_optimize_schema_errors(tmp_path, mutate):
    cfg = json.loads(json.dumps(CONFIG))
    mutate(cfg)
    assert main(["optimize", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == 3


def test_optimize_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["optimize", "--config", str(path)]) == 3


def test_optimize_divergence_exit(tmp_path):
    bad = tmp_path / "nan.csv"
    io.write_signal(bad, tf.gaussian(TimeGrid(64, 0.125)))
    # first data row becomes NaN; the row count stays intact
    lines = bad.read_text().splitlines()
    lines[1] = "-4,nan,0"
    bad.write_text("\n".join(lines) + "\n")
    cfg = {**CONFIG, "optimizer": {"start": {"kind": "file", "path": str(bad)}}}
    with pytest.warns(RuntimeWarning):
        code = main(["optimize", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    assert code == 4


def test_scan_command(tmp_path):
    cfg = write_config(tmp_path, CONFIG)
    assert main(["scan", "--config", str(cfg), "--lams", "2", "1", "0.5", "--out", str(tmp_path / "s"),
                 "--quiet"]) == 0
    res = json.loads((tmp_path / "s" / "scan.json").read_text())
    assert res["lam"] == 1.0 and res["lams"] == [0.5, 1.0, 2.0]


def test_timecorr_command(tmp_path):
    assert main(["timecorr", "--out", str(tmp_path / "t"), "--quiet"]) == 0
    res = json.loads((tmp_path / "t" / "timecorr.json").read_text())
    assert res["passed"]


def test_verify_command(tmp_path, capsys):
    assert main(["verify", "radar_correlation", "--out", str(tmp_path)]) == 0
    reports = json.loads((tmp_path / "verify.json").read_text())
    assert len(reports) == 1 and reports[0]["name"] == "radar_correlation"
    assert "PASS" in capsys.readouterr().out
    assert main(["verify", "nosuchsuite", "--out", str(tmp_path)]) == 3


def test_verify_failure_exit(tmp_path, monkeypatch):
    from amblab import verify

    monkeypatch.setitem(verify.SUITES, "radar_correlation",
                        lambda seed: verify.CheckReport("radar_correlation", False))
    assert main(["verify", "radar_correlation", "--out", str(tmp_path), "--quiet"]) == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "amblab", "verify", "radar_correlation", "--quiet",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
