import json
import subprocess
import sys

import pytest

from helpers import fixture_path
from relalg.cli import main, run


def cli_json(capsys, *argv):
    code = main([*argv, "--json"])
    return code, json.loads(capsys.readouterr().out)


class TestExitCodes:
    def test_ok(self, capsys):
        code, out = cli_json(capsys, "prolong", fixture_path("finite_type.alg"))
        assert code == 0
        assert out["result"]["steps"][0]["lift"] == {"z": "z*theta2"}

    def test_obstruction(self, capsys):
        code, out = cli_json(capsys, "prolong", fixture_path("nonint.alg"), "--steps", "2")
        assert code == 2
        assert out["result"]["steps"][1]["obstruction_forms"] == {"z": "2*theta1^theta2"}

    def test_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.alg"
        bad.write_text("frame t\nbase x\nfiber\nd x = w*t\n")
        code = main(["check", str(bad)])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_file(self, capsys):
        code, out = cli_json(capsys, "check", "/nonexistent.alg")
        assert code == 1 and "error" in out["result"]


class TestCommands:
    def test_surfaces_prefix_from_file(self, capsys):
        code, out = cli_json(capsys, "prolong", fixture_path("surfaces.alg"))
        assert code == 0
        assert out["result"]["steps"][0]["new_vars"] == ["c1"]
        assert out["result"]["steps"][0]["lift"]["phi"] == "-c1*sin(phi)*theta1 + c1*cos(phi)*theta2 + theta3"

    def test_var_prefix_flag(self, capsys):
        _, out = cli_json(capsys, "prolong", fixture_path("surfaces.alg"), "--var-prefix", "w")
        assert out["result"]["steps"][0]["new_vars"] == ["w1"]

    def test_tower_writes_json(self, tmp_path, capsys):
        out = tmp_path / "tower.json"
        code = main(["tower", fixture_path("finite_type.alg"), "--max-depth", "5", "--json", str(out)])
        assert code == 0
        data = json.loads(out.read_text())
        assert data["result"]["stabilized_at"] == 1
        assert "level 1" in capsys.readouterr().out

    def test_emit_roundtrip(self, tmp_path, capsys):
        code = main(["prolong", fixture_path("surfaces.alg"), "--steps", "2", "--emit", str(tmp_path)])
        assert code == 0
        emitted = tmp_path / "surfaces.level2.alg"
        assert emitted.exists()
        capsys.readouterr()
        code, out = cli_json(capsys, "prolong", str(emitted))
        assert out["result"]["steps"][0]["new_vars"] == ["c3"]

    def test_characters(self, capsys):
        _, out = cli_json(capsys, "characters", fixture_path("surfaces.alg"), "--flag", "1,2,3")
        assert out["result"]["s"] == [1, 0, 0]

    def test_cohomology(self, capsys):
        _, out = cli_json(capsys, "cohomology", fixture_path("surfaces.alg"), "--m", "0", "--l", "2", "--point", "K=1,phi=1/3")
        assert out["result"]["dim"] == 0

    def test_restrict(self, capsys):
        code, out = cli_json(capsys, "restrict", fixture_path("torsion_tableau.alg"), "--eq", "x=0")
        assert code == 0 and out["result"]["direct_square_zero"] is True

    def test_from_pde_and_compare(self, capsys, tmp_path):
        target = tmp_path / "uxy.alg"
        assert main(["from-pde", fixture_path("uxy.pde"), "--emit", str(target)]) == 0
        capsys.readouterr()
        code, out = cli_json(capsys, "prolong", str(target))
        assert out["result"]["steps"][0]["constraints"] == {"u_xy": "1"}
        assert out["result"]["steps"][0]["new_vars"] == ["u_yy"]
        code, out = cli_json(capsys, "pde-compare", fixture_path("uxy.pde"), "--depth", "1")
        assert code == 0 and out["result"]["match"] is True

    @pytest.mark.parametrize("cmd", ["check", "torsion", "cartan-test"])
    def test_text_mode(self, cmd, capsys):
        assert main([cmd, fixture_path("surfaces.alg"), "--quiet"]) == 0
        assert capsys.readouterr().out.strip()


def test_json_is_deterministic():
    argv = ["tower", fixture_path("surfaces.alg"), "--max-depth", "2", "--seed", "3"]
    first = run(argv)[1].to_json()
    second = run(argv)[1].to_json()
    assert first == second


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "relalg", "prolong", fixture_path("finite_type.alg")], capture_output=True, text=True)
    assert out.returncode == 0 and "z*theta2" in out.stdout
