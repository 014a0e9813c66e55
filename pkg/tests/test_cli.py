import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from binormal.cli import EXIT_FAIL, EXIT_INFRA, EXIT_OK, EXIT_VALIDATION, main
from binormal.spectral import admissible_time, load_calibration


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def load(path):
    return json.loads(path.read_text())


def test_selfsimilar_report(tmp_path):
    code, out = run(tmp_path, "s", "selfsimilar")
    assert code == EXIT_OK
    rep = load(out / "angle_law.json")
    assert [r["alpha"] for r in rep["rows"]] == [0.25, 0.5, 1.0]
    assert all(r["abs_err"] <= 5e-3 for r in rep["rows"]) and rep["all_pass"]
    assert (out / "profile_alpha_0p5.csv").exists()


def test_selfsimilar_empty_list(tmp_path):
    code, out = run(tmp_path, "s", "selfsimilar", "--set", "alphas=")
    assert code == EXIT_OK
    assert load(out / "angle_law.json")["rows"] == []


def test_selfsimilar_negative_alpha(tmp_path, capsys):
    code, out = run(tmp_path, "s", "selfsimilar", "--set", "alphas=-1")
    assert code == EXIT_VALIDATION
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 2 and err["error"] == "ValidationError"
    assert load(out / "error.json") == err


def test_selfsimilar_acceptance_failure(tmp_path):
    code, out = run(tmp_path, "s", "selfsimilar", "--set", "ymax=60", "--set", "angle_tol=1e-12")
    assert code == EXIT_FAIL
    assert load(out / "run_manifest.json")["status"] == "acceptance_failure"


def test_infrastructure_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["selfsimilar", "--set", "alphas=", "--out", str(blocker / "sub")])
    assert code == EXIT_INFRA


def test_unknown_key(tmp_path):
    code, _ = run(tmp_path, "s", "selfsimilar", "--set", "nope=1")
    assert code == EXIT_VALIDATION


def test_deterministic_reports(tmp_path):
    args = ["selfsimilar", "--set", "ymax=40", "--set", "alphas=0.3, 0.9"]
    _, a = run(tmp_path, "a", *args)
    _, b = run(tmp_path, "b", *args)
    assert (a / "angle_law.json").read_bytes() == (b / "angle_law.json").read_bytes()
    args = ["direct-sim", "--set", "h=0.05", "--set", "eps=0.2", "--set", "L=2"]
    _, a = run(tmp_path, "c", *args)
    _, b = run(tmp_path, "d", *args)
    assert (a / "direct_sim.json").read_bytes() == (b / "direct_sim.json").read_bytes()


def test_manifest_hashes(tmp_path):
    code, out = run(tmp_path, "s", "selfsimilar", "--set", "ymax=40")
    man = load(out / "run_manifest.json")
    assert man["command"] == "selfsimilar" and man["status"] == "ok"
    assert man["config"]["ymax"] == 40.0
    paths = {f["path"] for f in man["files"]}
    assert "angle_law.json" in paths and len(paths) == 4
    for f in man["files"]:
        assert hashlib.sha256((out / f["path"]).read_bytes()).hexdigest() == f["sha256"]


def test_growth_scan_admissibility_error(tmp_path, capsys):
    code, out = run(tmp_path, "g", "growth-scan", "--n", "8")
    assert code == EXIT_VALIDATION
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "AdmissibilityError" and err["required_n"] == 13


def test_growth_scan_snap(tmp_path):
    code, out = run(tmp_path, "g", "growth-scan", "--n", "16", "--snap-8pi", "--set", "n_off=0")
    assert code == EXIT_OK
    rep = load(out / "growth_report.json")
    assert rep["snap_8pi"] is True
    t = rep["entries"][0]["t"]
    k = 1 / (8 * math.pi * t)
    assert abs(k - round(k)) <= 1e-9 and round(k) == rep["snap_index"]["16"]
    assert (out / "spectrum_n16.csv").exists()


def test_xi_report(tmp_path):
    t = admissible_time(math.pi / 2, 16, False, load_calibration())
    code, out = run(tmp_path, "x", "xi", "--set", "alpha=1.0", "--set", f"xi_times={t!r}",
                    "--set", "xi_intervals=1")
    assert code == EXIT_OK
    rep = load(out / "xi_report.json")
    assert rep["target"] == pytest.approx(8 * math.pi, rel=1e-15)
    assert abs(rep["measurements"][0]["value"] / (8 * math.pi) - 1) <= 0.25


def test_direct_sim_no_corners(tmp_path):
    code, out = run(tmp_path, "d", "direct-sim", "--set", "positions=", "--set", "h=0.05",
                    "--set", "eps=0.2", "--set", "snapshot_times=0.005")
    assert code == EXIT_OK
    for name in ("snapshot_t0.csv", "snapshot_t0p005.csv", "snapshot_t0p01.csv"):
        data = np.loadtxt(out / name, delimiter=",", skiprows=1)
        np.testing.assert_array_equal(data[:, 1:], np.tile([1.0, 0, 0], (len(data), 1)))


def test_compare_time_mismatch(tmp_path):
    code, out = run(tmp_path, "c", "compare", "--set", "t=0.01", "--set", "t_final=0.02")
    assert code == EXIT_VALIDATION
    assert load(out / "error.json")["error"] == "ValidationError"


def test_show_config_round_trip(tmp_path, capsys):
    assert main(["--show-config", "--theta", "1.25", "--n", "16,32"]) == EXIT_OK
    text = capsys.readouterr().out
    p = tmp_path / "c.cfg"
    p.write_text(text)
    assert main(["--show-config", "--config", str(p)]) == EXIT_OK
    assert capsys.readouterr().out == text


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "binormal.cli", "--schema"], capture_output=True,
                       text=True, check=True)
    assert "snap_8pi" in r.stdout
