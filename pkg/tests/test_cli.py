import json
import subprocess
import sys

import pytest

from thinfilm import __version__
from thinfilm.cli import main

CONFIG = """
[model]
N = 16
t_end = 0.2
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(CONFIG)
    return path


def test_run_and_check(config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "PASS energy_law" in printed
    assert main(["check", str(out / "series.csv")]) == 0
    assert "PASS energy_law" in capsys.readouterr().out


def test_check_detects_tampering(config, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(config), "--out", str(out)])
    lines = (out / "series.csv").read_text().splitlines()
    cols = lines[-1].split(",")
    cols[2] = repr(float(cols[2]) + 1.0)  # energy jumps at the last record
    lines[-1] = ",".join(cols)
    (out / "series.csv").write_text("\n".join(lines) + "\n")
    assert main(["check", str(out / "series.csv")]) == 1
    assert "FAIL energy_law" in capsys.readouterr().out


def test_override_and_seed(config, tmp_path):
    out = tmp_path / "out"
    rc = main(["run", str(config), "--override", "init.kind=example5_random", "--override", "dt=0.02",
               "--seed", "9", "--out", str(out)])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["init"]["seed"] == "9"
    assert manifest["resolved"]["steps"] == 10


def test_config_error_exit_code(config, capsys):
    assert main(["run", str(config), "--override", "model.chi=0.1"]) == 2
    assert "chi_min" in capsys.readouterr().err


def test_missing_manifest(tmp_path, capsys):
    (tmp_path / "series.csv").write_text("t\n")
    assert main(["check", str(tmp_path / "series.csv")]) == 2


def test_sweep(config, tmp_path, capsys):
    out = tmp_path / "sweep"
    rc = main(["sweep", str(config), "--override", "sweep.parameter=epsilon_sq",
               "--override", "sweep.values=0.01, 0.1", "--out", str(out)])
    assert rc == 0
    assert (out / "summary.csv").exists()


def test_converge(config, tmp_path):
    out = tmp_path / "conv"
    rc = main(["converge", str(config), "--override", "t_end=0.04", "--override", "dt_ladder=0.004, 0.002",
               "--override", "reference_refinement=8", "--out", str(out)])
    assert rc == 0
    assert (out / "convergence_dt.csv").read_text().startswith("dt,error,order")


def test_converge_needs_ladder(config):
    assert main(["converge", str(config)]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "thinfilm", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
