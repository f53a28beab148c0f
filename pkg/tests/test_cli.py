"""Command line driver: exit codes, report schema, determinism."""

import csv
import json
import math

import jsonschema
import numpy as np
import pytest

from conecalc import cli, verify
from conecalc.cones import FiberCone

VALIDATOR = jsonschema.Draft202012Validator(cli.load_schema())


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_cloud(tmp_path, name="cloud.csv", labeled=True, dim=2, n=4000):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.0, 1.0, size=(n, dim))
    lines = ["x1,x2,label" if labeled else ",".join(
        f"x{i + 1}" for i in range(dim))]
    if labeled:
        for p in pts:
            lines.append(f"{p[0]},{p[1]},{'A' if p[1] <= 0 else 'B'}")
    else:
        for p in pts:
            lines.append(",".join(str(v) for v in p))
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestUsageErrors:
    """Everything user-fixable exits 1 with a message on stderr."""

    @pytest.mark.parametrize("argv", [
        ["analyze", "--fn", "x +", "--at", "0"],
        ["analyze", "--builtin", "nope", "--at", "0"],
        ["analyze", "--fn", "x"],
        ["analyze", "--builtin", "abs", "--at", "0,0"],
        ["analyze", "--builtin", "abs", "--at", "zero"],
        ["analyze", "--builtin", "abs", "--at", "0", "--ladder", "1,0.5"],
        ["cones", "--csv", "/nonexistent.csv", "--at", "0,0"],
        ["verify", "--only", "nope"],
        [],
    ])
    def test_exit_1(self, capsys, argv):
        code, out, err = run(capsys, *argv)
        assert code == 1
        assert out == ""
        assert "error" in err

    def test_parse_error_carries_position(self, capsys):
        code, _, err = run(capsys, "analyze", "--fn", "x ~ 2", "--at", "0")
        assert code == 1
        assert "position" in err

    def test_bad_csv_header(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x,y\n0,0\n")
        code, _, err = run(capsys, "cones", "--csv", str(p), "--at", "0,0")
        assert code == 1 and "header" in err

    def test_plot_needs_plane_cloud(self, capsys, tmp_path):
        p = tmp_path / "c3.csv"
        rows = "\n".join(f"{v},{v},{v}" for v in np.linspace(0, 1, 50))
        p.write_text("x1,x2,x3\n" + rows + "\n")
        code, _, err = run(capsys, "cones", "--csv", str(p), "--at", "0,0,0",
                           "--plot", str(tmp_path / "p.csv"),
                           "--ladder", "0.5,0.5,0,3")
        assert code == 1 and "plot" in err


class TestEstimationErrors:
    def test_evaluation_failure_exits_2(self, capsys):
        code, out, err = run(capsys, "analyze", "--fn", "1/0", "--at", "1")
        assert code == 2
        assert out == ""
        assert "evaluation failed" in err

    def test_verify_failure_exits_2(self, capsys, monkeypatch):
        monkeypatch.setitem(
            verify.PROPERTIES, "always-fails",
            lambda seed: {"passed": False, "worst": 1.0, "tolerance": 0.5,
                          "cases": 1})
        code, out, _ = run(capsys, "verify", "--only", "always-fails")
        assert code == 2
        rep = json.loads(out)
        assert rep["suite"]["all_passed"] is False
        VALIDATOR.validate(rep)


class TestReports:
    def test_analyze_report_schema(self, capsys):
        code, out, _ = run(capsys, "analyze", "--builtin", "abs",
                           "--at", "0", "--at", "1",
                           "--check", "conormal-upper",
                           "--check", "epigraph-split", "--seed", "0")
        assert code == 0
        rep = json.loads(out)
        VALIDATOR.validate(rep)
        assert rep["function"] == {"name": "abs", "m": 1, "n": 1,
                                   "kind": "builtin"}
        r0 = rep["results"][0]["classification"]
        assert r0["lipschitz"] is True
        assert r0["strictly_differentiable"] is False
        assert set(rep["results"][0]["checks"]) == {"conormal-upper",
                                                    "epigraph-split"}

    def test_cones_report_schema(self, capsys, tmp_path):
        path = write_cloud(tmp_path)
        code, out, _ = run(capsys, "cones", "--csv", path,
                           "--at", "0,0", "--seed", "0")
        assert code == 0
        rep = json.loads(out)
        VALIDATOR.validate(rep)
        assert rep["cloud"]["labeled"] is True
        row = rep["results"][0]
        for key in ("tangent", "whitney", "strict",
                    "conormal_lower", "conormal_upper"):
            assert "dim" in row[key]

    def test_verify_report_schema(self, capsys):
        code, out, _ = run(capsys, "verify", "--only", "bipolarity",
                           "--seed", "0")
        assert code == 0
        rep = json.loads(out)
        VALIDATOR.validate(rep)
        assert rep["suite"]["results"][0]["name"] == "bipolarity"

    def test_builtins_report_schema(self, capsys):
        code, out, _ = run(capsys, "builtins")
        assert code == 0
        rep = json.loads(out)
        VALIDATOR.validate(rep)
        names = {b["name"] for b in rep["builtins"]}
        assert {"abs", "x2sin", "cube", "preiss_lip(d)"} <= names
        assert all(b["summary"] for b in rep["builtins"])

    def test_report_flag_writes_file(self, capsys, tmp_path):
        dest = tmp_path / "report.json"
        code, out, _ = run(capsys, "analyze", "--builtin", "cube",
                           "--at", "1", "--report", str(dest))
        assert code == 0
        assert out == ""
        rep = json.loads(dest.read_text())
        VALIDATOR.validate(rep)
        deriv = rep["results"][0]["classification"]["derivative"][0][0]
        assert deriv == pytest.approx(3.0, abs=1e-3)

    def test_csv_function_source(self, capsys, tmp_path):
        xs = np.linspace(-1.0, 1.0, 201)
        body = "\n".join(f"{x},{2.0 * x}" for x in xs)
        p = tmp_path / "lin.csv"
        p.write_text("x1,x2\n" + body + "\n")
        code, out, _ = run(capsys, "analyze", "--csv", str(p), "--at", "0.25")
        assert code == 0
        rep = json.loads(out)
        cls = rep["results"][0]["classification"]
        assert cls["strictly_differentiable"] is True
        assert cls["derivative"][0][0] == pytest.approx(2.0, abs=1e-2)

    def test_infinity_encoding(self, capsys):
        code, out, _ = run(capsys, "analyze", "--builtin", "sqrt_abs",
                           "--at", "0")
        assert code == 0
        cls = json.loads(out)["results"][0]["classification"]
        assert cls["lipschitz"] is False
        assert cls["lipschitz_constant"] == {"inf": True, "sign": 1}

    def test_angles_round_to_six_decimals(self, capsys):
        _, out, _ = run(capsys, "analyze", "--builtin", "abs", "--at", "0")
        arcs = json.loads(out)["results"][0]["classification"]["whitney"]["arcs"]
        assert arcs
        for lo, hi in arcs:
            assert lo == round(lo, 6) and hi == round(hi, 6)


class TestDeterminism:
    def test_byte_identical_reruns(self, capsys):
        argv = ("analyze", "--builtin", "x2sin", "--at", "0", "--seed", "7")
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second

    def test_jobs_do_not_change_results(self, capsys):
        base = ("analyze", "--builtin", "abs", "--at", "0", "--at", "0.5",
                "--seed", "3")
        _, one, _ = run(capsys, *base, "--jobs", "1")
        _, two, _ = run(capsys, *base, "--jobs", "4")
        assert json.loads(one)["results"] == json.loads(two)["results"]

    def test_seed_env_fallback(self, capsys, monkeypatch):
        monkeypatch.setenv("CONECALC_SEED", "11")
        _, out, _ = run(capsys, "verify", "--only", "bipolarity")
        assert json.loads(out)["config"]["seed"] == 11


class TestPlot:
    def test_plot_file_format(self, capsys, tmp_path):
        path = write_cloud(tmp_path)
        dest = tmp_path / "trace.csv"
        code, _, _ = run(capsys, "cones", "--csv", path, "--at", "0,0",
                         "--plot", str(dest), "--seed", "0")
        assert code == 0
        with open(dest, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["point_index", "cone", "arc", "theta", "ux", "uy"]
        assert len(rows) > 1
        kinds = set()
        for idx, name, arc, theta, ux, uy in rows[1:]:
            kinds.add(name)
            th = float(theta)
            assert math.cos(th) == pytest.approx(float(ux), abs=1e-5)
            assert math.sin(th) == pytest.approx(float(uy), abs=1e-5)
        assert kinds <= {"tangent", "whitney", "strict"}
        assert "tangent" in kinds

    def test_single_ray_gets_one_row(self):
        rows = list(cli._plot_rows(0, "tangent", FiberCone.from_arcs([(0.3, 0.3)])))
        assert rows == [[0, "tangent", 0, 0.3, 0.955336, 0.29552]]

    def test_wedge_traced_at_degree_steps(self):
        w = FiberCone.from_arcs([(0.0, 0.5 * math.pi)])
        rows = list(cli._plot_rows(1, "whitney", w))
        assert len(rows) == 91
        assert rows[0][3:] == [0.0, 1.0, 0.0]
        assert rows[-1][3] == pytest.approx(0.5 * math.pi, abs=1e-6)
