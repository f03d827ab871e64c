"""Session fixtures: real CSV inputs produced by the simulator CLI.

The plotting package is exercised against files written by the actual
``xdiff`` command (which must be installed, see the README), not
hand-rolled lookalikes — the point is to catch schema drift between
the two packages.
"""

import json
import shutil
import subprocess

import pytest

MODEL = {
    "n": 2,
    "delta": 0.1,
    "A": [0.2, 0.1, 0.1, 0.2],
    "noise": {"kind": "diagonal_sqrt", "c": 0.01},
}


def run_xdiff(command: str, config: dict, cfg_path, out_dir) -> None:
    cfg_path.write_text(json.dumps(config))
    proc = subprocess.run(
        ["xdiff", command, "--config", str(cfg_path), "--out", str(out_dir)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, f"xdiff {command} failed:\n{proc.stderr}"


@pytest.fixture(scope="session", autouse=True)
def require_simulator():
    if shutil.which("xdiff") is None:
        pytest.fail("the xdiff CLI is not installed; install the simulator package first")


@pytest.fixture(scope="session")
def convergence_outputs(tmp_path_factory):
    """convergence.csv + fit.csv from a small dt-refinement run."""
    root = tmp_path_factory.mktemp("conv")
    config = {
        "model": MODEL,
        "grid": {"J": 8},
        "time": {"dt": 0.001, "T": 0.02},
        "ensemble": {"samples": 3, "seed": 7},
        "study": {
            "kind": "convergence-time",
            "levels": [0.004, 0.002],
            "reference": 0.001,
        },
    }
    run_xdiff("convergence-time", config, root / "cfg.json", root / "out")
    return {"data": root / "out" / "convergence.csv", "fit": root / "out" / "fit.csv"}


@pytest.fixture(scope="session")
def longtime_outputs(tmp_path_factory):
    """series.csv + fit.csv from a small long-horizon ensemble."""
    root = tmp_path_factory.mktemp("longtime")
    config = {
        "model": {**MODEL, "noise": {"kind": "off"}},
        "grid": {"J": 8},
        "time": {"dt": 0.01, "T": 0.2},
        "ensemble": {"samples": 2, "seed": 7},
        "study": {"kind": "longtime", "record_every": 1},
    }
    run_xdiff("longtime", config, root / "cfg.json", root / "out")
    return {"data": root / "out" / "series.csv", "fit": root / "out" / "fit.csv"}
