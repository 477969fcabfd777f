from __future__ import annotations

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rodhomog import __version__
from rodhomog.cli import config_hash, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ISO = str(CONFIGS / "isotropic.cfg")


def _run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def _report(capsys, *argv):
    status, out, err = _run(capsys, *argv)
    assert status == 0, err
    return json.loads(out)


class TestSection:
    def test_disc_oracle(self, capsys):
        rep = _report(capsys, "section", "--primitive", "disc", "--resolution", "4000")
        r = rep["result"]
        assert r["mu2"] == pytest.approx(math.pi / 4, rel=2e-3)
        assert r["torsion_constant"] == pytest.approx(math.pi / 2, rel=1e-2)
        assert rep["version"] == __version__
        assert rep["config_hash"] == config_hash(rep["config"])

    def test_rectangle_dimensions(self, capsys):
        rep = _report(capsys, "section", "--primitive", "rectangle", "--width", "2", "--height", "1",
                      "--resolution", "400")
        assert rep["result"]["mu2"] == pytest.approx(2.0**3 / 12, rel=1e-10)

    def test_mesh_file(self, capsys, tmp_path):
        p = tmp_path / "tri.mesh"
        p.write_text("4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n")
        rep = _report(capsys, "section", "--mesh", str(p))
        assert rep["result"]["area"] == pytest.approx(1.0)
        assert len(rep["config"]["mesh"]["sha256"]) == 64

    def test_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            assert main(["section", "--resolution", "300", "--out", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_mesh(self, capsys, tmp_path):
        status, out, err = _run(capsys, "section", "--mesh", str(tmp_path / "none.mesh"))
        assert status == 2 and out == ""
        e = json.loads(err)["error"]
        assert e["code"] == "mesh-not-found" and e["exit_status"] == 2

    def test_malformed_mesh(self, capsys, tmp_path):
        p = tmp_path / "bad.mesh"
        p.write_text("3 1\n0 0\n1 x\n0 1\n0 1 2\n")
        status, _, err = _run(capsys, "section", "--mesh", str(p))
        assert status == 2
        assert "line 3" in json.loads(err)["error"]["message"]

    def test_bad_threads(self, capsys):
        status, _, err = _run(capsys, "section", "--threads", "0")
        assert status == 2 and "threads" in err


class TestStiffness:
    def test_report_fields(self, capsys):
        rep = _report(capsys, "stiffness", "--resolution", "600", "--material", ISO)
        r = rep["result"]
        for key in ("M", "Q0", "a_min", "mu2", "mu3", "torsion_constant", "mesh_stats", "solver_residuals"):
            assert key in r
        M = np.array(r["M"]).reshape(4, 4)
        np.testing.assert_allclose(M, M.T, atol=1e-12)
        assert max(abs(v) for v in r["a_min"]) <= 1e-8
        assert rep["config"]["material"]["sha256"]

    def test_missing_material(self, capsys, tmp_path):
        status, _, err = _run(capsys, "stiffness", "--material", str(tmp_path / "x.cfg"))
        assert status == 2
        assert json.loads(err)["error"]["code"] == "material-not-found"

    def test_bad_material(self, capsys, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("kind = isotropic\nlambda = 1\n")
        status, _, err = _run(capsys, "stiffness", "--resolution", "200", "--material", str(p))
        assert status == 2
        assert "missing key 'mu'" in json.loads(err)["error"]["message"]

    def test_material_required(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["stiffness"])
        assert exc.value.code == 2


class TestRodAndProbe:
    def test_rod_twist(self, capsys):
        rep = _report(capsys, "rod", "--resolution", "600", "--material", ISO, "--intervals", "24",
                      "--twist", "0.4")
        r = rep["result"]
        assert r["converged"] and r["monotone"]
        assert r["frame"]["N"] == 24 and len(r["frame"]["quaternions"]) == 25
        assert r["energy"] > 0

    def test_rod_end_moment(self, capsys):
        rep = _report(capsys, "rod", "--resolution", "300", "--material", ISO, "--intervals", "16",
                      "--end-moment", "0", "0", "0.1")
        assert rep["config"]["end_moment"] == [0.0, 0.0, 0.1]
        assert rep["result"]["energy"] < 0

    def test_probe_small(self, capsys):
        rep = _report(capsys, "probe", "--resolution", "200", "--material", ISO, "--h-ladder", "0.2,0.1",
                      "--intervals", "40")
        r = rep["result"]
        assert len(r["rungs"]) == 2
        assert r["rungs"][1]["relative_gap"] < r["rungs"][0]["relative_gap"]

    def test_bad_ladder(self, capsys):
        with pytest.raises(SystemExit):
            main(["probe", "--material", ISO, "--h-ladder", "0.2,2"])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "rodhomog", "section", "--resolution", "100"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["command"] == "section"
