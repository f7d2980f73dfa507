from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from superradiance.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out.strip(), err


def test_point_reference_three_level(capsys):
    code, out, _ = run(capsys, "point", "--f01", "0.3995", "--f02", "0.4069", "--f12", "0.735",
                       "--D", "5", "--omega10", "0.17", "--omega21", "1")
    assert code == 0
    assert out.startswith("phase=SR trk=feasible")


def test_point_mode_flag_and_direct(capsys):
    code, out, _ = run(capsys, "--mode", "point", "--direct", "--omega01", "0.6", "--D", "0")
    assert code == 0
    assert out.startswith("phase=SR trk=n/a")


def test_trk_infeasible(capsys):
    code, out, _ = run(capsys, "trk", "--f01", "0.6", "--f02", "0.5", "--f12", "0")
    assert code == 0
    assert out == "infeasible: ground_sum=1.1"


def test_unknown_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["point", "--bogus", "1"])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_validation_error_exit_2(capsys):
    code, _, err = run(capsys, "point", "--D", "-1")
    assert code == 2 and "D must be" in err
    code, _, err = run(capsys, "scan2d", "--config", "/nonexistent.json")
    assert code == 2
    code, _, _ = run(capsys, "--f01", "0.1")
    assert code == 2


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mode": "trk", "f04": 1}))
    code, _, err = run(capsys, "--config", str(cfg))
    assert code == 2 and "f04" in err


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mode": "trk", "f01": 0.6, "f02": 0.5}))
    code, out, _ = run(capsys, "--config", str(cfg), "--f02", "0.1")
    assert code == 0 and out.startswith("feasible")


def test_scan2d_outputs_and_round_trip(tmp_path, capsys):
    prefix = tmp_path / "v" / "scan"
    code, out, _ = run(capsys, "scan2d", "--D", "1", "--omega10", "1", "--omega21", "0.1",
                       "--axis1", "f01", "--axis2", "f02", "--range", "0", "1.5",
                       "--steps", "21", "--out", str(prefix), "--threads", "2")
    assert code == 0
    assert out.startswith("SR∩TRK=0 cells")
    grid_csv = Path(f"{prefix}.csv").read_text()
    bnd_csv = Path(f"{prefix}_boundary.csv").read_text()
    summary = json.loads(Path(f"{prefix}_summary.json").read_text())
    rows = list(csv.reader(grid_csv.splitlines()))
    assert len(rows) == 1 + 21 * 21
    assert bnd_csv.splitlines()[0] == "axis1,axis2,jump,order"
    assert summary["sr_trk_cells"] == 0
    assert summary["boundary_orders"]["Second"] > 0
    # re-running from the echoed config reproduces every file bit for bit
    code, out2, _ = run(capsys, "--config", f"{prefix}_summary.json", "--threads", "1")
    assert code == 0 and out2 == out
    assert Path(f"{prefix}.csv").read_text() == grid_csv
    assert Path(f"{prefix}_boundary.csv").read_text() == bnd_csv


def test_v_config_runs_reduced(tmp_path, capsys):
    code, out, _ = run(capsys, "--config", str(CONFIGS / "fig3.json"), "--steps", "31",
                       "--out", str(tmp_path / "fig3"))
    assert code == 0
    assert out.startswith("SR∩TRK=0 cells")


def test_scan3d_small(tmp_path, capsys):
    code, out, _ = run(capsys, "--config", str(CONFIGS / "fig5.json"), "--steps", "11",
                       "--out", str(tmp_path / "vol"))
    assert code == 0
    assert out.startswith("SR∩TRK=")
    data = json.loads((tmp_path / "vol_summary.json").read_text())
    assert data["sr_trk_voxels"] > 0


def test_well_solve(tmp_path, capsys):
    code, out, _ = run(capsys, "well-solve", "--potential", str(CONFIGS / "infinite_well.txt"),
                       "--out", str(tmp_path / "box"))
    assert code == 0
    data = json.loads((tmp_path / "box_summary.json").read_text())
    assert data["strengths"]["f01"] == pytest.approx(0.96065, abs=1e-3)
    assert (tmp_path / "box_wavefunctions.csv").read_text().startswith("x,psi0,psi1,psi2\n")


def test_well_solve_insufficient_exit_3(tmp_path, capsys):
    pot = tmp_path / "shallow.txt"
    pot.write_text("domain -2 2.2\n-2 0\n0 -20\n0.2 0\n")
    code, _, err = run(capsys, "well-solve", "--potential", str(pot), "--out", str(tmp_path / "s"))
    assert code == 3 and "1 state" in err


def test_well_solve_missing_file_exit_2(capsys):
    code, _, _ = run(capsys, "well-solve", "--potential", "/nonexistent.txt")
    assert code == 2


def test_well_fit_single(tmp_path, capsys):
    code, out, _ = run(capsys, "well-fit", "--family", "single", "--f01", "0.96065",
                       "--f12", "1.86767", "--anharmonicity", "0.6", "--n-grid", "1000",
                       "--out", str(tmp_path / "fit"))
    assert code == 0 and "success=yes" in out
    assert (tmp_path / "fit_potential.txt").read_text().startswith("domain")


def test_well_fit_infeasible_exit_2(capsys):
    code, _, err = run(capsys, "well-fit", "--f01", "0.8", "--f02", "0.8", "--f12", "0.9",
                       "--anharmonicity", "0.2")
    assert code == 2 and "TRK" in err


def test_dicke_oracle(capsys):
    code, out, _ = run(capsys, "dicke-oracle")
    assert code == 0
    assert "Omega01=0.500000 order=Second" in out


def test_dicke_oracle_no_boundary_exit_3(capsys):
    code, _, _ = run(capsys, "dicke-oracle", "--range", "0", "0.4")
    assert code == 3
