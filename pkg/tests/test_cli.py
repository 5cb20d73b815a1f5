"""Command line behavior: plumbing, exit codes, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from kinetic_traffic import GameTable, build_game_table
from kinetic_traffic.cli import main
from kinetic_traffic.verify import run_suite


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSimulate:
    def test_reports_final_state(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--n", "2", "--rho", "0.8", "--t-final", "60"
        )
        assert code == 0
        assert "steady=yes" in out
        line = next(l for l in out.splitlines() if l.startswith("f_final="))
        f = [float(x) for x in line.split("=")[1].split()]
        assert abs(f[0] - 0.6) <= 1e-8
        assert abs(f[1] - 0.2) <= 1e-8

    def test_uniform_start_without_seed(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--n", "3", "--rho", "0.3", "--t-final", "0.01",
            "--out-csv", "/dev/null",
        )
        assert code == 0

    def test_seed_changes_start_deterministically(self, capsys):
        args = ("simulate", "--n", "3", "--rho", "0.4", "--t-final", "1")
        _, plain, _ = run_cli(capsys, *args)
        _, seeded, _ = run_cli(capsys, *args, "--seed", "5")
        _, seeded2, _ = run_cli(capsys, *args, "--seed", "5")
        _, other, _ = run_cli(capsys, *args, "--seed", "6")
        assert seeded == seeded2
        assert seeded != plain
        assert seeded != other

    def test_writes_trajectory_csv(self, capsys, tmp_path):
        out_file = tmp_path / "tr.csv"
        code, _, _ = run_cli(
            capsys, "simulate", "--n", "2", "--rho", "0.5", "--t-final", "0.1",
            "--out-csv", str(out_file),
        )
        assert code == 0
        lines = out_file.read_text().strip().split("\n")
        assert lines[0] == "t,f_1,f_2,rho,q,u"
        assert len(lines) == 12


class TestEquilibrium:
    def test_json_record(self, capsys, tmp_path):
        out_file = tmp_path / "eq.json"
        code, out, _ = run_cli(
            capsys, "equilibrium", "--n", "3", "--rho", "0.75",
            "--out-json", str(out_file),
        )
        assert code == 0
        assert "phase=congested" in out
        payload = json.loads(out_file.read_text())
        assert payload["stable"] is True
        assert abs(payload["f_inf"][0] - 0.5) <= 1e-12
        assert abs(payload["q"] - 0.13789934334069012) <= 1e-12
        rules = [b["rule"] for b in payload["branch_data"]]
        assert rules == ["congested", "quadratic", "remainder"]

    def test_physical_units(self, capsys, tmp_path):
        out_file = tmp_path / "eq.json"
        code, out, _ = run_cli(
            capsys, "equilibrium", "--n", "2", "--rho", "0.25",
            "--units", "physical", "--out-json", str(out_file),
        )
        assert code == 0
        payload = json.loads(out_file.read_text())
        assert payload["rho"] == 50.0
        assert payload["u"] == 100.0
        assert payload["q"] == 5000.0


class TestDiagram:
    def test_writes_all_formats(self, capsys, tmp_path):
        csv_f, json_f, svg_f = (tmp_path / x for x in ("d.csv", "d.json", "d.svg"))
        code, out, _ = run_cli(
            capsys, "diagram", "--n", "3", "--rho-steps", "21",
            "--out-csv", str(csv_f), "--out-json", str(json_f),
            "--out-svg", str(svg_f),
        )
        assert code == 0
        assert "sigma=0.5" in out
        assert csv_f.read_text().startswith("rho,q,u,phase\n")
        assert json.loads(json_f.read_text())["n"] == 3
        assert svg_f.read_text().startswith("<svg")

    def test_byte_identical_reruns(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            code, _, _ = run_cli(
                capsys, "diagram", "--n", "4", "--rho-steps", "41",
                "--out-csv", str(path),
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_jobs_flag_keeps_output(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli(capsys, "diagram", "--n", "3", "--rho-steps", "31",
                "--out-json", str(a))
        run_cli(capsys, "diagram", "--n", "3", "--rho-steps", "31",
                "--jobs", "2", "--out-json", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_physical_units_capacity(self, capsys, tmp_path):
        out_file = tmp_path / "d.json"
        code, out, _ = run_cli(
            capsys, "diagram", "--n", "2", "--rho-steps", "21",
            "--units", "physical", "--out-json", str(out_file),
        )
        assert code == 0
        assert "sigma=100" in out
        payload = json.loads(out_file.read_text())
        assert payload["sigma"] == 100.0
        assert payload["q_max"] == 10000.0


class TestVerifyCommand:
    def test_small_suite_passes(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--n-max", "2")
        assert code == 0
        assert out.count("PASS") == 6
        assert "FAIL" not in out

    def test_corrupted_tables_fail_the_suite(self):
        # negative control: a broken table builder must be caught by the
        # stochasticity group
        def broken(n, rho):
            good = build_game_table(n, rho)
            A = good.A.copy()
            A[0, 0, :] *= 0.5
            return GameTable(n=n, rho=rho, A=A)

        results = run_suite(n_max=2, table_builder=broken)
        by_name = {r.name: r for r in results}
        assert not by_name["stochasticity"].passed


class TestExitCodes:
    def test_usage_errors(self, capsys):
        code, _, err = run_cli(capsys, "simulate", "--n", "1", "--rho", "0.5")
        assert code == 1
        assert "invalid input" in err

        code, _, _ = run_cli(capsys, "equilibrium", "--n", "3", "--rho", "1.5")
        assert code == 1

    def test_argparse_errors_use_usage_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["no-such-command"])
        assert exc.value.code == 1
        capsys.readouterr()
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--rho", "0.5"])
        assert exc.value.code == 1
        capsys.readouterr()

    def test_numerical_failure_code(self, capsys):
        # a hopeless horizon leaves every free-phase point unconverged,
        # so no free phase can be delimited
        code, _, err = run_cli(
            capsys, "diagram", "--n", "3", "--method", "integrate",
            "--rho-steps", "11", "--t-final", "1",
        )
        assert code == 2
        assert "numerical failure" in err

    def test_io_failure_code(self, capsys, tmp_path):
        target = tmp_path / "missing" / "d.csv"
        code, _, err = run_cli(
            capsys, "diagram", "--n", "2", "--rho-steps", "11",
            "--out-csv", str(target),
        )
        assert code == 3
        assert "cannot write" in err


class TestConsoleEntry:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "kinetic_traffic", "equilibrium",
             "--n", "2", "--rho", "0.8"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert "f_inf=0.6 0.2" in proc.stdout
