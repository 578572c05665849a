import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sqvac import cli
from sqvac.wigner import WignerGrid, rotation_residual


def run(argv):
    return cli.main([str(a) for a in argv])


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "klsweep" in capsys.readouterr().out
    for cmd in ("codeword", "prepare", "klsweep", "wigner"):
        assert cli.main([cmd, "--help"]) == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sqvac", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


def test_missing_required_is_validation_error():
    assert cli.main(["codeword"]) == cli.EXIT_VALIDATION
    assert cli.main(["bogus"]) == cli.EXIT_VALIDATION


def test_codeword_outputs(tmp_path, capsys):
    out = tmp_path / "cw"
    assert run(["codeword", "--m", 2, "--strength", 1.5, "--k", 1, "--out", out]) == 0
    pair = json.loads((out / "pair.json").read_text())
    assert pair
    support = json.loads((out / "support.json").read_text())
    assert support["zero_L"]["first_levels"][:3] == [0, 4, 8]
    assert support["one_L"]["first_levels"][:3] == [2, 6, 10]
    psi = json.loads((out / "psi_1.json").read_text())
    assert len(psi["amplitudes"]) == psi["n_max"] + 1
    rec = json.loads((out / "run.json").read_text())
    assert rec["command"] == "codeword" and len(rec["config_hash"]) == 12
    assert "n_max=" in capsys.readouterr().out


def test_codeword_validation_codes(tmp_path, capsys):
    assert run(["codeword", "--m", 3, "--strength", 1, "--out", tmp_path / "a"]) == cli.EXIT_VALIDATION
    assert run(["codeword", "--m", 2, "--strength", 1, "--k", 5, "--out", tmp_path / "b"]) == cli.EXIT_VALIDATION
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "ValidationError"
    # r = 0 has no normalizable |1_L>
    assert run(["codeword", "--m", 2, "--strength", 0, "--out", tmp_path / "c"]) == cli.EXIT_VALIDATION
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "DegenerateCodewordError"


def test_codeword_cat(tmp_path):
    out = tmp_path / "cat"
    assert run(["codeword", "--family", "cat", "--m", 2, "--strength", 1.4142, "--out", out]) == 0
    support = json.loads((out / "support.json").read_text())
    assert support["zero_L"]["mean_photon_number"] == pytest.approx(1.928, abs=1e-3)
    assert support["zero_L"]["first_levels"][:3] == [0, 2, 4]


def test_hashed_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "env"))
    assert run(["codeword", "--m", 2, "--strength", 1.0]) == 0
    dirs = list((tmp_path / "env").iterdir())
    assert len(dirs) == 1 and dirs[0].name.startswith("codeword-") and len(dirs[0].name) == len("codeword-") + 12
    assert run(["codeword", "--m", 2, "--strength", 1.0, "--out-root", tmp_path / "flag"]) == 0
    assert [d.name for d in (tmp_path / "flag").iterdir()] == [dirs[0].name]
    assert run(["codeword", "--m", 2, "--strength", 1.1, "--out-root", tmp_path / "flag"]) == 0
    assert len(list((tmp_path / "flag").iterdir())) == 2


def test_prepare_postselect(tmp_path):
    out = tmp_path / "p"
    assert run(["prepare", "--m", 2, "--r", 1.0, "--target", 0, "--out", out]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["cumulative_probability"] == pytest.approx(0.75778005587810691417, abs=1e-10)
    assert meta["fidelity"] >= 1 - 1e-10


def test_prepare_feedforward_seeded(tmp_path):
    args = ["prepare", "--m", 4, "--r", 1.0, "--target", 1, "--mode", "feedforward", "--seed", 11]
    assert run(args + ["--out", tmp_path / "a"]) == 0
    assert run(args + ["--out", tmp_path / "b"]) == 0
    for name in ("metadata.json", "state.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("argv", [
    ["--algorithm", "pow2", "--m", 8, "--r", 1.5, "--target", 1],
    ["--algorithm", "equal", "--m", 6, "--r", 1.0],
])
def test_prepare_examples(tmp_path, argv):
    assert run(["prepare", *argv, "--out", tmp_path]) == 0
    assert json.loads((tmp_path / "metadata.json").read_text())["fidelity"] >= 1 - 1e-8


def test_prepare_trace(tmp_path):
    out = tmp_path / "t"
    assert run(["prepare", "--m", 2, "--r", 0.8, "--trace", "--points", 21, "--format", "csv", "--out", out]) == 0
    traces = sorted(p.name for p in out.glob("trace_*.csv"))
    assert traces == ["trace_00.csv", "trace_01.csv"]


def test_prepare_exit_codes(tmp_path):
    assert run(["prepare", "--m", 2, "--r", 0.0, "--target", 1, "--out", tmp_path / "u"]) == cli.EXIT_UNREACHABLE
    assert run(["prepare", "--m", 6, "--r", 1.0, "--out", tmp_path / "v"]) == cli.EXIT_VALIDATION
    assert run(["prepare", "--m", 6, "--r", 1.0, "--algorithm", "even", "--out", tmp_path / "w"]) == 0


def test_klsweep_csv(tmp_path):
    out = tmp_path / "k"
    argv = ["klsweep", "--channel", "loss", "--legs-list", "2,4", "--match-nbar", 2.0,
            "--gamma-grid", "0:0.1:0.05", "--format", "csv", "--no-convergence", "--out", out]
    assert run(argv) == 0
    lines = (out / "kl.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 2 * 3
    calib = json.loads((out / "calibration.json").read_text())
    assert [c["strength"] for c in calib] == pytest.approx([1.30631496689261, 1.50424317594808], abs=1e-9)


def test_klsweep_identity_channel(tmp_path):
    out = tmp_path / "z"
    argv = ["klsweep", "--families", "squeezed,cat", "--legs-list", "2,4", "--channel", "loss",
            "--match-nbar", 2, "--gamma-grid", "0", "--out", out]
    assert run(argv) == 0
    rows = json.loads((out / "kl.json").read_text())["rows"]
    assert len(rows) == 4 and all(r["V"] == 0.0 for r in rows)


def test_klsweep_byte_identical_across_jobs(tmp_path):
    base = ["klsweep", "--channel", "dephasing", "--basis", "dual", "--legs-list", "2,4", "--strength", 0.8,
            "--gamma-grid", "0.01,0.05", "--all-pairs", "--format", "csv", "--out-root", tmp_path]
    assert run(base + ["--jobs", 1]) == 0
    first = {p.name: (p / "kl.csv").read_bytes() for p in tmp_path.iterdir()}
    assert run(base + ["--jobs", 3]) == 0
    # --jobs is not hashed, so the second run lands in (and overwrites) the same directory
    second = {p.name: (p / "kl.csv").read_bytes() for p in tmp_path.iterdir()}
    assert first == second and len(first) == 1


def test_klsweep_validation(tmp_path):
    base = ["klsweep", "--channel", "loss", "--out", tmp_path / "x"]
    assert run(base + ["--strength", 1.0, "--gamma-grid", "1.0"]) == cli.EXIT_VALIDATION
    assert run(base + ["--gamma-grid", "0.1"]) == cli.EXIT_VALIDATION
    assert run(base + ["--strength", 1.0, "--jobs", 0]) == cli.EXIT_VALIDATION
    assert run(base + ["--strength", 1.0, "--families", "gkp"]) == cli.EXIT_VALIDATION


def test_klsweep_all_points_failed(tmp_path):
    argv = ["klsweep", "--channel", "loss", "--legs-list", "2", "--strength", 0.0,
            "--gamma-grid", "0.05", "--out", tmp_path / "f"]
    assert run(argv) == cli.EXIT_SWEEP_FAILED


def test_wigner_outputs(tmp_path, capsys):
    out = tmp_path / "w"
    assert run(["wigner", "--m", 2, "--strength", 1.0, "--logical", 1, "--points", 41, "--pgm", "--out", out]) == 0
    d = json.loads((out / "wigner.json").read_text())
    assert d["shape"] == [41, 41]
    assert d["values"][20 * 41 + 20] == pytest.approx(1 / math.pi, abs=1e-9)
    assert (out / "wigner.pgm").read_bytes().startswith(b"P5\n41 41\n255\n")
    assert "W(0,0)" in capsys.readouterr().out
    assert run(["wigner", "--strength", 1.0, "--points", 1, "--out", tmp_path / "bad"]) == cli.EXIT_VALIDATION


def test_wigner_examples(tmp_path):
    out = tmp_path / "w4"
    assert run(["wigner", "--m", 4, "--strength", 1.5, "--points", 121, "--out", out]) == 0
    d = json.loads((out / "wigner.json").read_text())
    q = np.array(d["q_axis"])
    grid = WignerGrid(q, np.array(d["p_axis"]), np.array(d["values"]).reshape(d["shape"]), d["n_pad"])
    assert rotation_residual(grid, math.pi / 2) <= 1e-2
    out = tmp_path / "vac"
    assert run(["wigner", "--strength", 0, "--points", 21, "--extent", 3, "--out", out]) == 0
    d = json.loads((out / "wigner.json").read_text())
    q = np.array(d["q_axis"])
    ref = np.exp(-q[:, None] ** 2 - q[None, :] ** 2) / math.pi
    assert np.max(np.abs(np.array(d["values"]).reshape(21, 21) - ref)) < 1e-12


def test_config_merge_flag_wins(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep settings\nlegs-list = 2\ngamma_grid = 0.02,0.04\nformat = csv\n"
                   "no-convergence = true\nstrength = 0.5\n")
    out = tmp_path / "c"
    assert run(["klsweep", "--channel", "loss", "--config", cfg, "--strength", 0.7, "--out", out]) == 0
    rec = json.loads((out / "run.json").read_text())["config"]
    assert rec["legs_list"] == [2] and rec["gamma_grid"] == [0.02, 0.04]
    assert rec["format"] == "csv" and rec["no_convergence"] is True
    assert rec["strength"] == 0.7
    assert (out / "kl.csv").exists()


def test_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    argv = ["codeword", "--strength", 1.0, "--config", cfg, "--out", tmp_path / "o"]
    assert run(argv) == cli.EXIT_VALIDATION
    cfg.write_text("family = gkp\n")
    assert run(argv) == cli.EXIT_VALIDATION
    cfg.write_text("just a line\n")
    assert run(argv) == cli.EXIT_VALIDATION
    assert run(["codeword", "--strength", 1.0, "--config", tmp_path / "missing.cfg"]) == cli.EXIT_VALIDATION
