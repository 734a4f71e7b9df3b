import csv
import json
import subprocess
import sys

import pytest

from tppp import cli
from tppp.analytic import success_prob_tppp
from tppp.model import NetworkParams
from tppp.numerics import NoConvergence

PARAMS = {"lam": 1.0, "mu": 1.0, "p": 0.3, "theta": 1.0, "d_link": 0.25, "alpha": 4.0}


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_success_command_and_manifest_replay(tmp_path):
    cfg = _write(tmp_path, "s.json", {"params": PARAMS, "theta_db": [0.0, 10.0], "models": ["TPPP", "PPP2D"]})
    out1 = tmp_path / "a"
    assert cli.main(["success", cfg, "--out", str(out1)]) == 0
    rows = _rows(out1 / "success.csv")
    assert len(rows) == 4
    assert float(rows[0]["success_prob"]) == success_prob_tppp(NetworkParams(**PARAMS))
    man = json.loads((out1 / "success_manifest.json").read_text())
    assert man["status"] == "ok" and man["seed"] == 0
    assert man["notes"]["timing"]["ratio"] > 1
    out2 = tmp_path / "b"
    assert cli.main(["success", str(out1 / "success_manifest.json"), "--out", str(out2)]) == 0
    assert (out1 / "success.csv").read_bytes() == (out2 / "success.csv").read_bytes()
    man2 = json.loads((out2 / "success_manifest.json").read_text())
    assert man2["outputs"] == man["outputs"]


def test_simulate_is_seeded_and_thread_independent(tmp_path):
    cfg = _write(tmp_path, "m.json", {"params": PARAMS, "model": "PLP_PPP", "n_realizations": 3000,
                                       "x_grid": [0.5, 0.9], "outputs": ["md", "success", "raw"]})
    assert cli.main(["simulate", cfg, "--out", str(tmp_path / "a"), "--seed", "5"]) == 0
    assert cli.main(["simulate", cfg, "--out", str(tmp_path / "b"), "--seed", "5", "--threads", "2"]) == 0
    for name in ("simulate_md.csv", "simulate_success.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    raw = list((tmp_path / "a").glob("simulate_raw_*.csv"))
    assert raw and len(raw[0].read_text().splitlines()) == 3001


def test_contour_command(tmp_path):
    cfg = _write(tmp_path, "c.json", {"params": PARAMS, "target_q": 0.9, "reliability_x": 0.5,
                                       "lambda_grid": [2.0, 0.5, 1.0]})
    assert cli.main(["contour", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "contour.csv")
    assert [float(r["lambda"]) for r in rows] == [0.5, 1.0, 2.0]
    assert all(r["feasible"] == "1" for r in rows)
    # 17 significant digits round-trip doubles exactly
    assert all(len(r["p"].replace(".", "").lstrip("0")) >= 15 for r in rows)


def test_metadist_command(tmp_path):
    cfg = _write(tmp_path, "d.json", {"params": PARAMS, "models": ["TPPP"], "methods": ["exact", "beta"],
                                       "x": [0.5, 0.9]})
    assert cli.main(["metadist", cfg, "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "metadist.csv")) == 4


def test_out_dir_from_environment(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "s.json", {"params": PARAMS, "models": ["TPPP"]})
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["success", cfg]) == 0
    assert (tmp_path / "env" / "success.csv").exists()


@pytest.mark.parametrize("cfg", [
    {"params": {**PARAMS, "alpha": 1.5}},
    {"params": {"lambda": 1.0}},
    {"params": PARAMS, "models": ["NOPE"]},
])
def test_config_errors_exit_2(tmp_path, capsys, cfg):
    path = _write(tmp_path, "bad.json", cfg)
    assert cli.main(["success", path, "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["command"] == "success" and "error" in err


def test_unreadable_config_and_wrong_manifest(tmp_path):
    assert cli.main(["success", str(tmp_path / "missing.json")]) == 2
    man = _write(tmp_path, "m.json", {"command": "contour", "config": {}, "seed": 1})
    assert cli.main(["success", man, "--out", str(tmp_path)]) == 2


def test_non_convergence_exit_3(tmp_path, monkeypatch):
    def boom(cfg, args, manifest):
        """Always fails."""
        raise NoConvergence("did not settle", partial=0.5)

    monkeypatch.setitem(cli.COMMANDS, "success", boom)
    path = _write(tmp_path, "s.json", {"params": PARAMS})
    assert cli.main(["success", path, "--out", str(tmp_path)]) == 3
    man = json.loads((tmp_path / "success_manifest.json").read_text())
    assert man["status"] == "partial" and man["notes"]["partial"] == "0.5"


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tppp", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
