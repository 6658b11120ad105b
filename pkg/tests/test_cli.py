"""Command line behavior: outputs, overrides, error reporting."""

import numpy as np
import pytest

from savac.cli import main

TINY = """
[domain]
dim = 1
level = 3

[time]
final_time = 0.01
n_steps = 8

[output]
snapshot_every = 4

[mc]
samples = 2
ref_level = 4
n_fine = 8
rung = 3 2
rung = 2 4

[rtrack]
level = 3
n_fine = 8
factors = 4 2
"""


def write_tiny(tmp_path, extra="", name="tiny.cfg"):
    path = tmp_path / name
    path.write_text(TINY + extra)
    return path


def read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_run_writes_log_and_fields(tmp_path, capsys):
    config = write_tiny(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    assert "run: 8 steps" in capsys.readouterr().out

    header, rows = read_rows(out / "run.csv")
    assert header == ["step", "time", "r", "sqrt_Eh", "E_sav", "cg_iters"]
    assert len(rows) == 9
    assert rows[0][0] == "0" and rows[0][5] == "0"
    assert float(rows[0][2]) == float(rows[0][3])  # r_0 = sqrt(E_h(phi_0))
    assert int(rows[-1][5]) > 0

    header, rows = read_rows(out / "field_000000.csv")
    assert header == ["node_index", "x", "phi"]
    assert len(rows) == 8
    np.testing.assert_allclose([float(r[2]) for r in rows],
                               np.cos(2 * np.pi * np.arange(8) / 8),
                               atol=1e-12)
    # snapshots at steps 4 and 8, nothing else
    assert (out / "field_000004.csv").exists()
    assert (out / "field_000008.csv").exists()
    assert len(list(out.glob("field_*.csv"))) == 3


def test_run_field_has_y_column_in_2d(tmp_path):
    config = tmp_path / "flat2d.cfg"
    config.write_text("\n".join([
        "[domain]", "dim = 2", "level = 2",
        "[time]", "final_time = 0.001", "n_steps = 2",
        "[initial]", "kind = constant", "value = 0.5",
    ]))
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    header, rows = read_rows(out / "field_000000.csv")
    assert header == ["node_index", "x", "y", "phi"]
    assert len(rows) == 16


def test_run_noise_dump(tmp_path):
    config = tmp_path / "dump.cfg"
    config.write_text(TINY.replace("snapshot_every = 4",
                                   "snapshot_every = 4\nnoise_dump = true"))
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    header, rows = read_rows(out / "noise.csv")
    assert header == ["sample", "mode_rank", "step", "increment"]
    assert len(rows) == 7 * 8  # seven default modes, eight steps
    assert rows[0][:3] == ["0", "0", "0"]
    assert rows[-1][:3] == ["0", "6", "7"]


def test_outputs_confined_to_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = write_tiny(tmp_path)
    out = tmp_path / "only_here"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0
    produced = {p for p in tmp_path.rglob("*") if p.is_file()}
    assert all(p == config or out in p.parents for p in produced)


def test_out_dir_resolution_precedence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = write_tiny(tmp_path)

    monkeypatch.setenv("SAV_SPDE_OUT", str(tmp_path / "from_env"))
    assert main(["run", "--config", str(config)]) == 0
    assert (tmp_path / "from_env" / "run.csv").exists()

    flag_dir = tmp_path / "from_flag"
    assert main(["run", "--config", str(config), "--out", str(flag_dir)]) == 0
    assert (flag_dir / "run.csv").exists()

    monkeypatch.delenv("SAV_SPDE_OUT")
    assert main(["run", "--config", str(config)]) == 0
    assert (tmp_path / "out" / "run.csv").exists()  # configured default


def test_eoc_csv_layout(tmp_path):
    config = write_tiny(tmp_path)
    out = tmp_path / "out"
    assert main(["eoc", "--config", str(config), "--out", str(out)]) == 0
    header, rows = read_rows(out / "eoc.csv")
    assert header == ["level", "h", "tau", "E_L2", "EOC_L2", "E_H1",
                      "EOC_H1", "E_tot", "EOC_tot", "samples"]
    assert len(rows) == 2
    assert [r[0] for r in rows] == ["3", "2"]
    assert rows[0][4] == ""  # no order on the finest rung
    assert rows[1][4] != ""
    assert all(r[9] == "2" for r in rows)


def test_mc_csv_layout(tmp_path):
    config = write_tiny(tmp_path)
    out = tmp_path / "out"
    assert main(["mc", "--config", str(config), "--out", str(out)]) == 0
    header, rows = read_rows(out / "mc_errors.csv")
    assert header == ["level", "h", "tau", "E_L2", "E_H1", "E_tot", "samples"]
    assert len(rows) == 2
    assert all(float(r[3]) > 0 for r in rows)


def test_rtrack_csv_layout(tmp_path):
    config = write_tiny(tmp_path)
    out = tmp_path / "out"
    assert main(["rtrack", "--config", str(config), "--out", str(out)]) == 0
    header, rows = read_rows(out / "rtrack.csv")
    assert header == ["tau", "mean_max_tracking_error", "observed_order"]
    assert len(rows) == 2
    assert rows[0][2] == ""
    assert rows[1][2] != ""


def test_seed_override_changes_results(tmp_path):
    config = write_tiny(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    out_c = tmp_path / "c"
    assert main(["eoc", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(["eoc", "--config", str(config), "--out", str(out_b),
                 "--seed", "7"]) == 0
    assert main(["eoc", "--config", str(config), "--out", str(out_c),
                 "--seed", "42"]) == 0
    bytes_a = (out_a / "eoc.csv").read_bytes()
    assert bytes_a != (out_b / "eoc.csv").read_bytes()
    assert bytes_a == (out_c / "eoc.csv").read_bytes()  # 42 is the default


def test_workers_override_keeps_bytes(tmp_path):
    config = write_tiny(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["eoc", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(["eoc", "--config", str(config), "--out", str(out_b),
                 "--workers", "2"]) == 0
    assert (out_a / "eoc.csv").read_bytes() == (out_b / "eoc.csv").read_bytes()


def test_samples_override(tmp_path):
    config = write_tiny(tmp_path)
    out = tmp_path / "out"
    assert main(["mc", "--config", str(config), "--out", str(out),
                 "--samples", "3"]) == 0
    _, rows = read_rows(out / "mc_errors.csv")
    assert all(r[6] == "3" for r in rows)


def test_check_passes(tmp_path, capsys):
    config = write_tiny(tmp_path)
    assert main(["check", "--config", str(config),
                 "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
    assert "FAIL" not in out
    assert "all 5 checks passed" in out


def test_missing_config_reports_one_line(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: config file not found:")
    assert err.count("\n") == 1


def test_invalid_config_reports_one_line(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("[domain]\ndim = 3\n")
    assert main(["run", "--config", str(config),
                 "--out", str(tmp_path / "out")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: 1 config violation(s):")
    assert "dim must be 1 or 2" in err
    assert err.count("\n") == 1


def test_unknown_command_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", "x.cfg"])
