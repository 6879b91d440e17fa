import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ineqlab import __version__
from ineqlab.cli import canonical_json, dispatch


def run(capsys, *argv):
    code = dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out), err


class TestCanonicalJson:
    def test_sorted_and_exact(self):
        text = canonical_json({"b": 0.1, "a": [1, np.float64(2.5)], "c": float("nan")})
        assert text == canonical_json(json.loads(text.replace("null", "NaN")))
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert json.loads(text)["b"] == 0.1
        assert json.loads(text)["c"] is None

    def test_arrays(self):
        assert json.loads(canonical_json({"x": np.arange(3)}))["x"] == [0, 1, 2]


class TestCommands:
    def test_catalog(self, capsys):
        code, rep, _ = run_json(capsys, "catalog")
        assert code == 0 and rep["passed"]
        assert "sym_exp" in rep["result"]["measures"]
        assert rep["tool"] == "ineqlab" and rep["version"] == __version__

    def test_constant_with_oracle(self, capsys):
        code, rep, _ = run_json(capsys, "constant", "two-point", "--alpha", "0.3", "--p", "1.5", "--oracle")
        res = rep["result"]
        assert code == 0
        assert res["gap"] <= 1e-6
        assert abs(res["closed_form"] - res["bruteforce"]) == pytest.approx(res["gap"], abs=1e-15)

    def test_verify_rho(self, capsys):
        code, rep, _ = run_json(capsys, "verify", "lemma", "--id", "rho-metric", "--trials", "2000", "--seed", "7")
        assert code == 0
        assert rep["result"]["violations"] == 0 and rep["result"]["trials"] == 2000

    def test_verify_selftest_fails(self, capsys):
        code, rep, _ = run_json(capsys, "verify", "lemma", "--id", "selftest-fail", "--trials", "5")
        assert code == 1 and not rep["passed"]

    def test_ia_ratio_gaussian(self, capsys):
        code, rep, _ = run_json(capsys, "ia-ratio", "--measure", "gauss:sigma=1", "--f", "1+0.1*sin(x)",
                                "--p", "1 1.5 1.9", "--a", "1", "--C", "1")
        assert code == 0
        assert len(rep["result"]["reports"]) == 3
        assert rep["result"]["max_ratio"] <= 1 + 1e-6

    def test_ia_ratio_violation(self, capsys):
        code, rep, _ = run_json(capsys, "ia-ratio", "--measure", "gauss:sigma=2", "--f", "exp(0.1*x)",
                                "--p", "1", "--a", "0", "--C", "1")
        assert code == 1 and rep["result"]["max_ratio"] > 1

    def test_transport_check(self, capsys):
        code, rep, _ = run_json(capsys, "transport", "check", "--r", "1.5", "--points", "601")
        assert code == 0
        assert rep["result"]["jacobian"]["violations"] == 0 and rep["result"]["z_at_least_x_pow_r"]

    def test_transport_dump(self, capsys):
        code, out, _ = run(capsys, "transport", "build", "--r", "1.5", "--dump", "csv")
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0
        assert rows[0] == ["x", "z", "z_prime", "jacobian_at_x", "bound_lo", "bound_hi"]
        assert len(rows) > 1000

    def test_tail_bound_csv(self, capsys):
        code, out, _ = run(capsys, "tail", "bound", "--a", "0.5", "--t", "0:3:0.5", "--format", "csv")
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0
        assert rows[0] == ["t", "bound", "empirical", "cp_upper"]
        assert [float(r[0]) for r in rows[1:]] == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]

    def test_tail_mc(self, capsys):
        code, rep, _ = run_json(capsys, "tail", "mc", "--r", "1.5", "--samples", "20000", "--t", "0:3:0.25",
                                "--seed", "5")
        assert code == 0
        curve = rep["result"]["curve"]
        assert len(curve["t"]) == len(curve["counts"]) == 13

    def test_mgf_verify(self, capsys):
        code, rep, _ = run_json(capsys, "mgf", "verify", "--measure", "gauss:sigma=1", "--C", "1", "--a", "1",
                                "--lambda", "0 0.5 1 1.8")
        assert code == 0 and rep["result"]["violations"] == 0

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "bound.csv"
        code, out, _ = run(capsys, "tail", "bound", "--a", "1", "--t", "0:1:0.5", "--out", str(target))
        assert code == 0 and out == ""
        assert target.read_text().startswith("t,bound")

    def test_timing_goes_to_stderr(self, capsys):
        code, out, err = run(capsys, "catalog", "--timing")
        assert code == 0 and "wall time" in err and "wall time" not in out


class TestExitCodes:
    def test_unknown_lemma(self, capsys):
        code, _, err = run(capsys, "verify", "lemma", "--id", "nope")
        assert code == 2 and "usage" in err

    def test_parse_error(self, capsys):
        code, _, err = run(capsys, "ia-ratio", "--measure", "gauss:sigma=1", "--f", "1+", "--p", "1.5", "--a", "1")
        assert code == 2 and "offset" in err

    def test_domain_error(self, capsys):
        code, _, _ = run(capsys, "constant", "two-point", "--alpha", "1.5", "--p", "1.5")
        assert code == 2

    def test_missing_subcommand(self, capsys):
        assert run(capsys)[0] == 2

    def test_no_csv_form(self, capsys):
        code, _, _ = run(capsys, "transport", "build", "--r", "1.5", "--format", "csv")
        assert code == 2


class TestDeterminism:
    ARGV = ("verify", "lemma", "--id", "lemma8", "--trials", "500", "--seed", "11")

    def test_identical_payload(self, capsys):
        first = run(capsys, *self.ARGV)[1]
        second = run(capsys, *self.ARGV)[1]
        assert first == second

    def test_seed_changes_payload(self, capsys):
        first = json.loads(run(capsys, *self.ARGV)[1])
        other = json.loads(run(capsys, *self.ARGV[:-1], "12")[1])
        assert first["config_digest"] != other["config_digest"]
        assert first["result"]["params_of_worst"] != other["result"]["params_of_worst"]

    def test_digest_ignores_output_options(self, capsys, tmp_path):
        a = json.loads(run(capsys, *self.ARGV)[1])
        run(capsys, *self.ARGV, "--out", str(tmp_path / "v.json"), "--timing")
        b = json.loads((tmp_path / "v.json").read_text())
        assert a["config_digest"] == b["config_digest"]

    def test_console_script_module(self):
        proc = subprocess.run([sys.executable, "-m", "ineqlab.cli", "catalog"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["passed"] is True
