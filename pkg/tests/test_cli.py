import copy
import json

import numpy as np
import pytest

from lattice_scatter import cli


REQUIRED_PRESETS = {
    "watson-greens",
    "point-scatterer-levinson",
    "constant-surface-d3",
    "iid-supercell-L4",
    "waveop-index",
}


def test_preset_catalog_and_listing(capsys):
    assert REQUIRED_PRESETS <= set(cli.PRESETS)
    assert cli.main(["preset"]) == 0
    listed = set(capsys.readouterr().out.split())
    assert REQUIRED_PRESETS <= listed


def test_unknown_preset_lists_available(capsys):
    assert cli.main(["preset", "no-such-thing"]) == 2
    err = capsys.readouterr().err
    assert "watson-greens" in err


def test_preset_emission_round_trips(capsys):
    assert cli.main(["preset", "bound-states-1d"]) == 0
    emitted = json.loads(capsys.readouterr().out)
    assert emitted == cli.PRESETS["bound-states-1d"]


def test_malformed_config_rejected(tmp_path):
    cfg = {"task": "green-scan", "model": {"symbol": {"kind": "laplacian", "d": 3}},
           "unknown_field": 1}
    report, code = cli.run(cfg, str(tmp_path / "o"))
    assert code == 2
    cfg2 = {"task": "not-a-task", "model": {"symbol": {"kind": "laplacian", "d": 3}}}
    report2, code2 = cli.run(cfg2, str(tmp_path / "o2"))
    assert code2 == 2


def test_malformed_json_exit_code(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "out")]) == 2


def test_bound_state_run_and_determinism(tmp_path):
    cfg = cli.PRESETS["bound-states-1d"]
    rep1, code1 = cli.run(copy.deepcopy(cfg), str(tmp_path / "a"))
    rep2, code2 = cli.run(copy.deepcopy(cfg), str(tmp_path / "b"), threads=2)
    assert code1 == 0 and code2 == 0
    for rep in (rep1, rep2):
        rep["wall_clock_seconds"] = None
    assert json.dumps(rep1, sort_keys=True, default=float) == json.dumps(
        rep2, sort_keys=True, default=float
    )
    report_file = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report_file["input_hash"] == rep1["input_hash"]
    assert report_file["toolkit_version"]


def test_zero_potential_run_passes(tmp_path):
    cfg = {
        "task": "levinson-finite",
        "model": {"symbol": {"kind": "laplacian", "d": 3}},
        "parameters": {
            "cell": {"sites": [[0, 0, 0]], "diagonal": [0.0]},
            "expected_count": 0,
        },
        "numerics": {"n_points": 96, "n_max": 128, "qtol": 1e-6, "error_pass": False},
    }
    rep, code = cli.run(cfg, str(tmp_path / "zero"))
    assert code == 0
    assert rep["results"]["count"] == 0
    assert abs(rep["results"]["winding"]) < 1e-9


def test_residual_failure_exit_code(tmp_path):
    cfg = {
        "task": "bound-states",
        "model": {"symbol": {"kind": "laplacian", "d": 1}},
        "parameters": {
            "cell": {"sites": [[0]], "diagonal": [1.5]},
            "expected_count": 2,  # wrong on purpose
        },
        "numerics": {"n_points": 256},
    }
    rep, code = cli.run(cfg, str(tmp_path / "f"))
    assert code == 1


def test_green_scan_artifacts(tmp_path):
    cfg = {
        "task": "green-scan",
        "model": {"symbol": {"kind": "laplacian", "d": 1}},
        "parameters": {"sites": [[0]], "n_energies": 21,
                       "checks": [{"energy": 3.0, "re": 5 ** -0.5, "im": 0.0, "tol": 1e-8}]},
        "numerics": {"n_points": 512, "n_max": 2048},
    }
    rep, code = cli.run(cfg, str(tmp_path / "g"))
    assert code == 0
    assert (tmp_path / "g" / "green_scan.csv").exists()
    assert (tmp_path / "g" / "green_scan.png").exists()
    assert (tmp_path / "g" / "report.json").exists()
