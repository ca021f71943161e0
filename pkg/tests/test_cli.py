import json
import subprocess
import sys

import pytest

from splitrx import cli
from splitrx.montecarlo import SimulationError
from splitrx.report import CSV_SCHEMA, read_csv

CONFIG = """\
[experiment]
name = small
kind = ser_vs_rho
formats = csv, json
emit_plot_data = true
output_dir = {out}

[sweep]
constellation = qam16
power = 20, 40
rho = 0.3, 0.7
detectors = low_complexity, ml_3d
trials = 2000
seed = 9
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(CONFIG.format(out=(tmp_path / "out").as_posix()))
    return path


class TestListPresets:
    def test_four_presets(self, capsys):
        assert cli.main(["list-presets"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert [ln.split()[0] for ln in lines] == ["fig3", "fig4", "fig5", "complexity"]

    def test_assumed_parameters_disclosed(self, capsys):
        cli.main(["list-presets"])
        fig4 = next(ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("fig4"))
        assert "var_antenna = 1 (assumed)" in fig4


class TestRun:
    def test_outputs(self, config_file, tmp_path, capsys):
        assert cli.main(["run", str(config_file)]) == 0
        out = tmp_path / "out"
        csv_path = out / "small_ser_vs_rho.csv"
        assert csv_path.read_text().splitlines()[0] == f"{CSV_SCHEMA} ser_vs_rho"
        rows = read_csv(csv_path)
        assert list(rows[0]) == ["power", "rho", "detector", "ser", "ci_half_width", "trials", "seed"]
        assert len(rows) == 2 * 2 * 2
        mirror = json.loads((out / "small_ser_vs_rho.json").read_text())["rows"]
        assert [r["ser"] for r in mirror] == [float(r["ser"]) for r in rows]
        assert (out / "small_ser_vs_rho.dat").exists()
        manifest = json.loads((out / "small_manifest.json").read_text())
        assert manifest["master_seed"] == 9
        assert len(manifest["config_hash"]) == 64
        assert set(manifest["timing"]) == {"simulate_s", "write_s"}
        assert not list(out.glob(".*.tmp"))

    def test_manifest_reproduces_csv(self, config_file, tmp_path):
        cli.main(["run", str(config_file)])
        manifest = json.loads((tmp_path / "out" / "small_manifest.json").read_text())
        again = tmp_path / "again.ini"
        again.write_text(manifest["config"].replace(
            "[sweep]", f"output_dir = {(tmp_path / 'again').as_posix()}\n\n[sweep]", 1))
        assert cli.main(["run", str(again)]) == 0
        first = (tmp_path / "out" / "small_ser_vs_rho.csv").read_bytes()
        assert (tmp_path / "again" / "small_ser_vs_rho.csv").read_bytes() == first

    def test_bad_rho_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text(CONFIG.format(out=tmp_path.as_posix()).replace("rho = 0.3, 0.7", "rho = 1.2"))
        assert cli.main(["run", str(path)]) == 2
        err = capsys.readouterr().err
        assert "rho" in err and "line 11" in err

    def test_missing_file_exit_2(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.ini")]) == 2

    def test_runtime_failure_exit_1(self, config_file, monkeypatch, capsys):
        def fail(*args, **kwargs):
            raise SimulationError("block 0 failed at power=20, rho=0.3, detector=ml_3d: boom")

        monkeypatch.setattr(cli, "sweep_rho", fail)
        assert cli.main(["run", str(config_file)]) == 1
        assert "power=20, rho=0.3" in capsys.readouterr().err


class TestPresets:
    def test_complexity_prints_tally(self, tmp_path, capsys):
        assert cli.main(["preset", "complexity", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "15 multiplications per upsilon evaluation" in out
        assert "ratio 20.07" in out
        assert (tmp_path / "complexity_complexity.csv").exists()

    def test_fig5_one_row_per_power(self, tmp_path):
        assert cli.main(["preset", "fig5", "--trials", "1000", "--seed", "2", "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "fig5_gain.csv")
        assert [float(r["power"]) for r in rows] == [50.0, 100.0, 200.0, 400.0]
        assert all(r["seed"] == "2" for r in rows)

    def test_fig3_file_names(self, tmp_path):
        assert cli.main(["preset", "fig3", "--trials", "1000", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "fig3_ser_vs_rho.csv").exists()
        assert (tmp_path / "fig3_manifest.json").exists()
        manifest = json.loads((tmp_path / "fig3_manifest.json").read_text())
        assert manifest["preset_assumptions"]

    def test_unknown_preset(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["preset", "fig9"])
        assert info.value.code == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "splitrx.cli", "list-presets"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.count("\n") == 4
