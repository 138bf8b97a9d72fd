import csv
import json
import subprocess
import sys

import pytest

from eulerprim.cli import main
from eulerprim.validation import strip_timings


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestExitCodes:
    def test_kacrice_ok(self, capsys):
        code, out, _ = run_cli(capsys, "kacrice", "--profile", "tent")
        assert code == 0
        rep = json.loads(out)
        assert rep["command"] == "kacrice"
        assert rep["summary"]["suite_passed"]

    def test_unknown_field(self, capsys):
        code, _, err = run_cli(capsys, "ec", "--field", "nope")
        assert code == 2
        assert "unknown field" in err

    def test_bad_flag(self, capsys):
        assert run_cli(capsys, "ec", "--bogus")[0] == 2

    def test_missing_command(self, capsys):
        assert run_cli(capsys)[0] == 2

    @pytest.mark.parametrize("argv", [
        ("moments", "--p", "1"),
        ("primitive", "--testfn", "bump:0.8:0.2"),
        ("shotnoise", "--reps", "1"),
        ("ec", "--level", "a,b"),
        ("primitive", "--resolution", "16"),
    ])
    def test_invalid_values(self, capsys, argv):
        assert run_cli(capsys, *argv)[0] == 2

    def test_version(self, capsys):
        assert run_cli(capsys, "--version")[0] == 0


class TestConfig:
    def test_file_and_flag_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[common]\nseed = 7\n[ec]\nlevel = 0.5\nspacing = 0.0625\n")
        code, out, _ = run_cli(capsys, "ec", "--config", str(cfg), "--method", "cubical")
        rep = json.loads(out)
        assert code == 0
        assert rep["master_seed"] == 7
        assert rep["config"]["level"] == "0.5"
        assert rep["config"]["method"] == "cubical"
        code, out, _ = run_cli(capsys, "ec", "--config", str(cfg), "--seed", "9", "--method", "cubical")
        assert json.loads(out)["master_seed"] == 9

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[ec]\ncolour = red\n")
        assert run_cli(capsys, "ec", "--config", str(cfg))[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run_cli(capsys, "ec", "--config", str(tmp_path / "absent.ini"))[0] == 2


class TestOutput:
    def test_output_and_csv(self, capsys, tmp_path):
        out, table = tmp_path / "r.json", tmp_path / "r.csv"
        code, stdout, _ = run_cli(capsys, "ec", "--field", "two_bump", "--spacing", "0.03125",
                                  "--level", "0.3,1.5", "--output", str(out), "--csv", str(table))
        assert code == 0 and stdout == ""
        rep = json.loads(out.read_text())
        rows = list(csv.reader(table.open()))
        assert rows[0] == ["level", "cubical", "bicov", "morse"]
        assert len(rows) == 3
        assert "output" not in rep["config"] and "workers" not in rep["config"]

    def test_deterministic_json(self, capsys):
        argv = ("primitive", "--field", "radial_exp", "--resolution", "128", "--level-count", "32")
        a = json.loads(run_cli(capsys, *argv)[1])
        b = json.loads(run_cli(capsys, *argv)[1])
        assert strip_timings(a) == strip_timings(b)

    def test_module_entry_point(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "eulerprim", "validate", "--only", "01"],
                             capture_output=True, text=True, cwd=tmp_path)
        assert res.returncode == 0
        rep = json.loads(res.stdout)
        assert [c["name"] for c in rep["checks"]] == ["01_radial_exactness"]
