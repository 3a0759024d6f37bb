import json
import re

import numpy as np
import pytest

from nltr.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, run
from nltr.surface import ImpedanceSurface
from nltr.sweeps import PAIR_COLUMNS, SWEEP_COLUMNS, format_rows, parse_rows, read_rows
from nltr.touchstone import parse_touchstone


def _run(cfg, out, *args):
    return run([*args, "--config", str(cfg), "--out", str(out), "--no-plots"])


def test_validate_config_bundled(capsys):
    assert run(["validate-config"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok ")


def test_print_effective_config_byte_stable(capsys, small_config):
    assert run(["sweep-freq", "--config", str(small_config), "--print-effective-config"]) == 0
    a = capsys.readouterr().out
    assert run(["sweep-freq", "--config", str(small_config), "--print-effective-config"]) == 0
    assert capsys.readouterr().out == a
    assert json.loads(a)["surface_grid"]["f_points"] == 8


def test_config_errors_exit_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("")
    assert run(["validate-config", "--config", str(p)]) == EXIT_CONFIG
    assert "1:1" in capsys.readouterr().err
    p.write_text('{"z_p": -50}')
    assert run(["validate-config", "--config", str(p)]) == EXIT_CONFIG
    assert "z_p" in capsys.readouterr().err


def test_missing_config_exit_4(tmp_path):
    assert run(["validate-config", "--config", str(tmp_path / "nope.json")]) == EXIT_IO


def test_unwritable_output_exit_4(tmp_path, small_config):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run(small_config, blocker / "sub", "surface") == EXIT_IO


def test_sweep_freq_outputs(tmp_path, small_config):
    out = tmp_path / "o"
    assert _run(small_config, out, "sweep-freq", "--power", "-30", "--f-start", "0.8e9",
                "--f-stop", "1.3e9", "-n", "6") == EXIT_OK
    rows = read_rows(out / "sweep_freq.csv")
    assert len(rows) == 6 and all(r["mode"] == "Rx" for r in rows)
    assert list(rows[0]) == SWEEP_COLUMNS
    for pair in ("ant_rx", "ant_tx"):
        f, s, z, comments = parse_touchstone((out / f"sweep_freq_{pair}.s2p").read_text())
        assert len(f) == 6 and z == 50.0
        assert any("config sha256" in c for c in comments)
    np.testing.assert_array_equal(
        s[:, 0, 0], [complex(r["s11_re"], r["s11_im"]) for r in rows])
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "sweep-freq" and len(man["config_sha256"]) == 64
    assert "margin_to_reference" in man["results"]["sweep_freq"]


def test_sweep_freq_single_point(tmp_path, small_config):
    out = tmp_path / "o"
    assert _run(small_config, out, "sweep-freq", "--f-start", "1e9", "--f-stop", "1e9",
                "-n", "1") == EXIT_OK
    assert len(read_rows(out / "sweep_freq.csv")) == 1


def test_sweep_freq_out_of_grid(tmp_path, small_config, capsys):
    assert _run(small_config, tmp_path / "o", "sweep-freq", "--f-start", "0.5e9") == EXIT_CONFIG
    assert "frequency" in capsys.readouterr().err


def test_sweep_power_single_point_and_pair_columns(tmp_path, small_config):
    out = tmp_path / "o"
    assert _run(small_config, out, "sweep-power", "--freq", "1.2e9", "--p-start", "0",
                "--p-stop", "0", "-n", "1", "--paper-eq4") == EXIT_OK
    rows = read_rows(out / "sweep_power.csv")
    assert len(rows) == 1 and list(rows[0]) == SWEEP_COLUMNS + PAIR_COLUMNS


def test_solver_failure_exit_3(tmp_path, small_config, capsys):
    doc = json.loads(small_config.read_text())
    doc["operating_point"] = {"max_iterations": 1, "tol_db": 1e-9}
    small_config.write_text(json.dumps(doc))
    assert _run(small_config, tmp_path / "o", "sweep-power", "-n", "3") == EXIT_SOLVER
    assert "did not converge" in capsys.readouterr().err


def test_surface_build_failure_exit_3(tmp_path, small_config):
    doc = json.loads(small_config.read_text())
    doc["solver"] = {"max_iterations": 1}
    small_config.write_text(json.dumps(doc))
    assert _run(small_config, tmp_path / "o", "surface", "--no-cache") == EXIT_SOLVER


def test_reproduce_all_with_plots(tmp_path, small_config):
    out = tmp_path / "o"
    assert run(["reproduce", "all", "--config", str(small_config), "--out", str(out)]) == 0
    text = (out / "fig3_nc_surface.csv").read_text()
    assert text.startswith("f_hz,p_dbm,re_ohm,im_ohm\n")
    assert ImpedanceSurface.parse_csv(text).values.shape == (8, 15)
    assert len(read_rows(out / "fig5_sweep_freq.csv")) == 11
    fig6 = read_rows(out / "fig6_sweep_power.csv")
    assert {"p_out_tx_dbm", "p_out_rx_dbm"} <= set(fig6[0])
    for png in ("fig3_nc_surface.png", "fig5_sweep_freq.png", "fig6_sweep_power.png"):
        assert (out / png).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    man = json.loads((out / "manifest.json").read_text())
    assert man["results"]["tx_probe"]["mode"] == "Tx"
    assert len(man["results"]["fig6_sweep_power"]["crossovers_dbm"]) == 1


def test_reproduce_freq_default_rows(tmp_path, small_config):
    doc = json.loads(small_config.read_text())
    del doc["sweeps"]
    small_config.write_text(json.dumps(doc))
    out = tmp_path / "o"
    assert _run(small_config, out, "reproduce", "fig5") == 0
    assert len(read_rows(out / "fig5_sweep_freq.csv")) == 101


def test_direct_flag_and_transient_solver(tmp_path, small_config):
    out = tmp_path / "o"
    assert _run(small_config, out, "sweep-power", "--direct", "-n", "2") == 0
    assert json.loads((out / "manifest.json").read_text())["operating_point"] == "direct"
    assert _run(small_config, out, "sweep-power", "--solver", "transient", "-n", "2") == 0
    assert json.loads((out / "manifest.json").read_text())["solver"] == "transient"


def test_optimize_outputs(tmp_path, small_config):
    doc = json.loads(small_config.read_text())
    doc["optimizer"] = {"ga": {"population": 4, "generations": 2},
                        "objective": {"n_freq": 2}}
    small_config.write_text(json.dumps(doc))
    out = tmp_path / "o"
    assert _run(small_config, out, "optimize", "--seed", "3") == 0
    trace = (out / "ga_trace.csv").read_text().splitlines()
    assert trace[0] == "generation,best_score,mean_score" and len(trace) == 4
    frag = json.loads((out / "ga_best_config.json").read_text())
    merged = dict(doc, **frag)
    p = tmp_path / "best.json"
    p.write_text(json.dumps(merged))
    assert run(["validate-config", "--config", str(p)]) == 0
    report = (out / "ga_report.json").read_text()
    assert _run(small_config, out, "optimize", "--seed", "3") == 0
    assert (out / "ga_report.json").read_text() == report


def test_csv_round_trip_exact():
    rows = [{"f_hz": 1e9 / 3, "p_dbm": -30.0, "port": "ant", "mode": "Rx",
             "il_ant_rx_db": 0.1 + 0.2, "x": 5e-324}]
    text = format_rows(rows)
    assert text.endswith("\n") and "\r" not in text
    assert parse_rows(text) == rows
    assert re.search(r"0\.30000000000000004", text)


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "nltr", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and r.stdout.startswith("nltr ")
