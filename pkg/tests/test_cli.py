"""End-to-end CLI behavior: artifacts, exit codes, determinism."""

import json
import math

import pytest

from pfcert.cli import main
from pfcert.oracle import two_bus_analytic

from conftest import TWO_BUS_MATPOWER


@pytest.fixture
def two_bus_file(tmp_path):
    path = tmp_path / "two_bus.m"
    path.write_text(TWO_BUS_MATPOWER)
    return path


def run(args):
    return main([str(a) for a in args])


def test_certify_holds(two_bus_file, tmp_path, capsys):
    out = tmp_path / "cert.json"
    code = run(["certify", "--case", two_bus_file, "--out", out])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["certificate"]["holds"] is True
    assert doc["certificate"]["radii"]["r_lo"] == pytest.approx(0.317837, abs=1e-5)
    # base load 2.5 sits exactly on the strict wang boundary (4 xi = 1): fails
    assert doc["baselines"]["wang"]["holds"] is False
    assert doc["baselines"]["dvijotham"]["holds"] is True
    assert doc["voltage_bounds"]["buses"][0]["bus"] == 2


def test_certify_failure_is_exit_1_with_artifact(two_bus_file, tmp_path):
    out = tmp_path / "cert.json"
    code = run(["certify", "--case", two_bus_file, "--scale", 5.0, "--out", out])
    assert code == 1
    doc = json.loads(out.read_text())
    assert doc["certificate"]["holds"] is False
    assert doc["certificate"]["reason"] == "stress_level"


def test_missing_case_is_exit_2(tmp_path, capsys):
    code = run(["certify", "--case", tmp_path / "missing.m"])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "input"


def test_bad_tolerance_is_exit_2(two_bus_file, capsys):
    assert run(["solve", "--case", two_bus_file, "--tol", -1]) == 2


def test_solve_emits_voltages(two_bus_file, tmp_path):
    out = tmp_path / "sol.json"
    code = run(["solve", "--case", two_bus_file, "--scale", 1.0, "--out", out])
    assert code == 0
    doc = json.loads(out.read_text())
    row = doc["voltages"][0]
    expected = two_bus_analytic(2.5, 0.0, 0.1)[0]
    assert row["bus"] == 2
    assert row["magnitude"] == pytest.approx(abs(expected), abs=1e-7)
    assert row["angle_deg"] == pytest.approx(math.degrees(math.atan2(expected.imag, expected.real)), abs=1e-5)


def test_solve_infeasible_is_exit_3(two_bus_file, capsys):
    code = run(["solve", "--case", two_bus_file, "--scale", 10.0, "--max-iter", 200])
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "numerical"


def test_solve_csv(two_bus_file, tmp_path):
    out = tmp_path / "sol.csv"
    assert run(["solve", "--case", two_bus_file, "--out", out, "--out-format", "csv"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "bus,magnitude,angle_deg,re,im"
    assert lines[1].startswith("2,0.965925826,")


def test_limits_json_and_determinism(two_bus_file, tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["limits", "--case", two_bus_file, "--with-oracle", "--out", out1]) == 0
    assert run(["limits", "--case", two_bus_file, "--with-oracle", "--out", out2]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    assert doc["lambda_p"] == pytest.approx(2.0, rel=1e-9)  # base p = 2.5 -> 5.0 / 2.5
    assert doc["lambda_actual"] == pytest.approx(2.0, abs=1e-4)
    assert doc["relative_error_p"] == pytest.approx(0.0, abs=1e-3)


def test_limits_known_solution_reports_total_scaling(two_bus_file, tmp_path):
    out = tmp_path / "k.json"
    assert run(["limits", "--case", two_bus_file, "--known-solution", "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["meta"]["mode"] == "from_known_solution"
    assert doc["total_scaling_p"] == pytest.approx(1 + doc["lambda_p"])


def test_sweep_with_direction_file(two_bus_file, tmp_path):
    # a second load bus is needed; build a 3-bus star file
    star = tmp_path / "star.m"
    star.write_text(
        TWO_BUS_MATPOWER.replace(
            "\t2\t1\t250\t0\t0\t0\t1\t1.00\t0\t345\t1\t1.10\t0.90;",
            "\t2\t1\t100\t30\t0\t0\t1\t1.00\t0\t345\t1\t1.10\t0.90;\n"
            "\t3\t1\t80\t20\t0\t0\t1\t1.00\t0\t345\t1\t1.10\t0.90;",
        ).replace(
            "\t1\t2\t0\t0.1\t0\t250\t250\t250\t0\t0\t1\t-360\t360;",
            "\t1\t2\t0\t0.1\t0\t250\t250\t250\t0\t0\t1\t-360\t360;\n"
            "\t1\t3\t0\t0.1\t0\t250\t250\t250\t0\t0\t1\t-360\t360;",
        )
    )
    directions = tmp_path / "dirs.json"
    directions.write_text(json.dumps([[0.0, 0.0], [45.0, 90.0], [180.0, 270.0]]))
    out = tmp_path / "sweep.csv"
    code = run(
        ["sweep", "--case", star, "--direction-file", directions, "--out", out, "--out-format", "csv"]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "phi_a_deg,phi_b_deg,lambda_p,lambda_w,lambda_d,lambda_actual"
    assert len(lines) == 4
    assert lines[3].startswith("180,270,")


def test_bounds_grid(two_bus_file, tmp_path):
    out = tmp_path / "bounds.csv"
    code = run(
        ["bounds", "--case", two_bus_file, "--bus", 2, "--scale-grid", "0.0:0.4:0.2",
         "--out", out, "--out-format", "csv"]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "lambda,proposed,wang,dvijotham,actual"
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == pytest.approx(1.0)


def test_oracle_limit_command(two_bus_file, tmp_path):
    out = tmp_path / "lim.json"
    assert run(["oracle-limit", "--case", two_bus_file, "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["lambda_actual"] == pytest.approx(2.0, abs=1e-4)


def test_certify_dump_reduction(two_bus_file, tmp_path):
    dump = tmp_path / "red.json"
    code = run(["certify", "--case", two_bus_file, "--scale", 0.5,
                "--dump-reduction", dump, "--out", tmp_path / "c.json"])
    assert code == 0
    doc = json.loads(dump.read_text())
    assert doc["load_ids"] == [2]
    assert doc["E"][0] == pytest.approx([1.0, 0.0])
    assert doc["Zhat"][0][0][1] == pytest.approx(0.1)
