from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from sigma2lab.cli import main
from sigma2lab.report import DEFAULT_TOLERANCES, RunConfig, constants_summary, format_float, to_jsonable
from sigma2lab.geometry import ModelDims


def run(argv, tmp_path):
    return main(list(argv) + ["--out", str(tmp_path)])


def test_constants_json(tmp_path, capsys):
    assert run(["constants", "--n", "9", "--p", "1"], tmp_path) == 0
    payload = json.loads((tmp_path / "constants_n9_p1_k2.json").read_text())
    assert payload["c_npk"] == 8
    assert payload["c"] == "225/16"
    assert payload["P2"] == 2.0
    assert "c_npk" in capsys.readouterr().out


def test_constants_csv(tmp_path):
    assert run(["constants", "--n", "9", "--p", "1", "--format", "csv"], tmp_path) == 0
    rows = list(csv.reader((tmp_path / "constants_n9_p1_k2.csv").open()))
    assert rows[0] == ["name", "value"]


def test_indicial_writes_exact_roots(tmp_path):
    assert run(["indicial", "--n", "9", "--p", "1", "--max-level", "5", "--format", "csv"], tmp_path) == 0
    payload = json.loads((tmp_path / "indicial_n9_p1_k2.json").read_text())
    assert payload["levels"][1]["gammaExact"] == ["-1", "2"]
    assert (tmp_path / "indicial_n9_p1_k2.csv").exists()


def test_radial_and_linearize(tmp_path):
    assert run(["radial", "--n", "9", "--p", "1", "--format", "csv"], tmp_path) == 0
    header = (tmp_path / "radial_n9_p1_k2.csv").open().readline().strip()
    assert header == "t,v,vdot,vddot,sigma1,sigma2"
    assert run(["linearize", "--n", "9", "--p", "1"], tmp_path) == 0
    limits = json.loads((tmp_path / "limit_coefficients_n9_p1_k2.json").read_text())
    assert len(limits["origin"]) == 5


def test_modes_table(tmp_path):
    assert run(["modes", "--n", "9", "--p", "1", "--ensemble", "4", "--tau0", "0,5", "--delta", "0.75"], tmp_path) == 0
    rows = json.loads((tmp_path / "modes_n9_p1_k2.json").read_text())
    assert [row["tau0"] for row in rows] == [0.0, 5.0]
    assert all(row["max_ratio"] <= 1 / (1.5**2 - 0.75**2) for row in rows)


def test_glue_summary(tmp_path):
    assert run(["glue", "--n", "9", "--p", "1", "--eps", "0.1"], tmp_path) == 0
    summary = json.loads((tmp_path / "glue_summary_n9_p1_k2.json").read_text())
    assert summary["epsilons"]["0.1"]["positive"] is True
    assert summary["j_cone_ok"] is False


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SYL_OUT_DIR", str(tmp_path / "env"))
    assert main(["constants", "--n", "9", "--p", "1"]) == 0
    assert (tmp_path / "env" / "constants_n9_p1_k2.json").exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["constants", "--n", "9", "--p", "2"],
        ["constants", "--n", "9", "--p", "1", "--tol.nonsense", "1"],
        ["constants", "--n", "9", "--p", "1", "--tol.v_inf", "abc"],
        ["constants", "--n", "9", "--p", "1", "--eps", "0.1,-1"],
        ["constants", "--n", "9"],
    ],
)
def test_usage_errors_exit_with_two(argv, tmp_path):
    assert main(argv) == 2


def test_tolerance_override_is_accepted(tmp_path):
    assert run(["constants", "--n", "9", "--p", "1", "--tol.v_inf=1e-3"], tmp_path) == 0


def test_module_entry_point():
    result = subprocess.run([sys.executable, "-m", "sigma2lab", "--help"], capture_output=True, text=True)
    assert result.returncode == 0
    assert "verify" in result.stdout


def test_report_helpers():
    assert format_float(0.1) == "0.1"
    assert to_jsonable({"a": float("nan")}) == {"a": "nan"}
    config = RunConfig(9, 1, 2, (0.1,), 5, None, (0.0,), 1, 4, {"v_inf": 1e-3}, "out", "json")
    assert config.tol("v_inf") == 1e-3
    assert config.tol("wronskian") == DEFAULT_TOLERANCES["wronskian"]
    assert "c_constant" in constants_summary(ModelDims(9, 1))["flags"]
