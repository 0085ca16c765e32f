"""Command-line and serialization tests: exit codes, file contents,
round-trips, and byte-level determinism."""

import json

import numpy as np
import pytest

import rollwaves.cli as cli
import rollwaves.workflows as workflows
from rollwaves import NoConvergence, TorusGrid
from rollwaves.serialize import (
    branch_point_from_dict,
    branch_point_to_dict,
    field_from_records,
    field_to_records,
)
from rollwaves.spectral import random_field


def run_cli(args):
    return cli.main([str(a) for a in args])


class TestRegionCommand:
    def test_writes_scan(self, tmp_path):
        out = tmp_path / "scan"
        code = run_cli(["--out", out, "region", "--kappa-min", 2, "--kappa-max", 12, "--samples", 11])
        assert code == 0
        lines = (out / "region_boundary.csv").read_text().strip().splitlines()
        assert lines[0] == "kappa,gamma_min,gamma_max"
        assert len(lines) == 1 + 22  # both branches
        row10 = next(line for line in lines if line.startswith("10.0,"))
        gamma_min_10 = float(row10.split(",")[1])
        assert gamma_min_10 == pytest.approx(2.9771124118494573, abs=1e-10)
        # mirrored branch rows carry negated bounds
        row_neg = next(line for line in lines if line.startswith("-10.0,"))
        parts = [float(v) for v in row_neg.split(",")]
        assert parts[1] == -10.0
        assert parts[2] == pytest.approx(-gamma_min_10, abs=1e-12)

    def test_empty_range_is_config_error(self, tmp_path):
        code = run_cli(["--out", tmp_path, "region", "--kappa-min", 5, "--kappa-max", 2])
        assert code == cli.EXIT_CONFIG


class TestKernelCommand:
    def test_interior_point(self, tmp_path):
        code = run_cli(["--out", tmp_path, "kernel", "--gamma", 5, "--kappa", 10])
        assert code == 0
        data = json.loads((tmp_path / "kernel_modes.json").read_text())
        assert data["region"] == "interior"
        assert data["n_kernel_modes"] == 4
        assert data["rank_deficient_count"] == 4
        assert max(data["kernel_mode_rel_singular"]) <= 1e-8
        assert data["off_kernel_min_rel_singular"] > 1e-8

    def test_border_point(self, tmp_path):
        code = run_cli(["--out", tmp_path, "kernel", "--gamma", 2, "--kappa", 3.8])
        assert code == 0
        data = json.loads((tmp_path / "kernel_modes.json").read_text())
        assert data["region"] == "border"
        assert data["n_kernel_modes"] == 2

    def test_mirrored_point(self, tmp_path):
        code = run_cli(["--out", tmp_path, "kernel", "--gamma", -5, "--kappa", -10])
        assert code == 0
        data = json.loads((tmp_path / "kernel_modes.json").read_text())
        assert data["region"] == "interior"
        assert data["mirror_branch"] is True
        assert data["n_kernel_modes"] == 4

    def test_outside_point_exits_3(self, tmp_path):
        code = run_cli(["--out", tmp_path, "kernel", "--gamma", 0.5, "--kappa", 10])
        assert code == cli.EXIT_REGION


class TestSolveCommand:
    def test_reference_solve_files(self, tmp_path):
        code = run_cli(
            ["--out", tmp_path, "solve", "--gamma", 5, "--kappa", 10, "--amplitude", 0.02]
        )
        assert code == 0
        for name in ("branch_point.json", "eta.csv", "u1.csv", "u2.csv"):
            assert (tmp_path / name).exists()
        data = json.loads((tmp_path / "branch_point.json").read_text())
        assert data["converged"] is True
        assert data["residual_norm"] <= 1e-10
        header = (tmp_path / "eta.csv").read_text().splitlines()[0]
        assert header == "x1,x2,value"

    def test_zero_amplitude_trivial(self, tmp_path):
        code = run_cli(["--out", tmp_path, "solve", "--gamma", 5, "--kappa", 10, "--amplitude", 0])
        assert code == 0
        data = json.loads((tmp_path / "branch_point.json").read_text())
        assert data["residual_norm"] == 0.0
        assert data["fields"]["eta"] == []

    def test_negative_drive_matches_reflected(self, tmp_path):
        for tag, gamma, kappa in (("pos", 5, 10), ("neg", -5, -10)):
            assert run_cli(
                ["--out", tmp_path / tag, "solve", "--gamma", gamma, "--kappa", kappa,
                 "--amplitude", 0.02]
            ) == 0
        pos = branch_point_from_dict(
            json.loads((tmp_path / "pos" / "branch_point.json").read_text())
        )
        neg = branch_point_from_dict(
            json.loads((tmp_path / "neg" / "branch_point.json").read_text())
        )
        from rollwaves import reflect_solution

        mirrored = reflect_solution(pos)
        assert (mirrored.state - neg.state).norm() <= 1e-10
        assert neg.drive.gamma == pytest.approx(mirrored.drive.gamma, abs=1e-12)

    def test_outside_region_exits_3(self, tmp_path):
        code = run_cli(["--out", tmp_path, "solve", "--gamma", 0.5, "--kappa", 10])
        assert code == cli.EXIT_REGION

    def test_no_convergence_exits_4_with_diagnostics(self, tmp_path, monkeypatch):
        real_solve = workflows.solve_branch_point

        def failing_solve(phys, drive, basis, a, theta, opts=None, **kwargs):
            bp = real_solve(phys, drive, basis, a, theta, opts=opts, **kwargs)
            err = NoConvergence("forced failure", final_residual=bp.residual_norm, iterations=1)
            err.branch_point = bp
            raise err

        monkeypatch.setattr(workflows, "solve_branch_point", failing_solve)
        code = run_cli(["--out", tmp_path, "solve", "--gamma", 5, "--kappa", 10])
        assert code == cli.EXIT_NO_CONVERGENCE
        assert (tmp_path / "branch_point.json").exists()  # diagnostics still written


class TestSweepCommand:
    def test_mini_sweep_with_failure_row(self, tmp_path):
        code = run_cli(
            ["--out", tmp_path, "sweep", "--kappa", 10, "--gammas", "3.0,5.0,0.5",
             "--amplitude", 0.02]
        )
        assert code == 0  # some entries succeeded
        lines = (tmp_path / "sweep_summary.csv").read_text().strip().splitlines()
        assert len(lines) == 4
        assert lines[1].endswith("True") and lines[2].endswith("True")
        assert lines[3].endswith("False")  # gamma = 0.5 is outside the region
        assert (tmp_path / "solution_00_eta.csv").exists()
        assert not (tmp_path / "solution_02_eta.csv").exists()

    def test_parallel_sweep_matches_serial(self, tmp_path):
        for tag, jobs in (("serial", 1), ("pool", 2)):
            code = run_cli(
                ["--out", tmp_path / tag, "--jobs", jobs, "--n1", 32, "--n2", 32,
                 "sweep", "--kappa", 10, "--gammas", "3.0,5.0", "--amplitude", 0.01]
            )
            assert code == 0
        serial = (tmp_path / "serial" / "sweep_summary.csv").read_bytes()
        pool = (tmp_path / "pool" / "sweep_summary.csv").read_bytes()
        assert serial == pool

    def test_period_lengths_grow_along_sweep(self, tmp_path):
        code = run_cli(
            ["--out", tmp_path, "sweep", "--kappa", 10, "--gammas", "3.0,6.5,9.3",
             "--amplitude", 0.02]
        )
        assert code == 0
        lines = (tmp_path / "sweep_summary.csv").read_text().strip().splitlines()[1:]
        lengths = [float(line.split(",")[1]) for line in lines]
        assert lengths == sorted(lengths)


class TestConfigHandling:
    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"mu": 0.15, "sigma": 2.0, "n1": 32, "n2": 32, "out": str(tmp_path / "o")}))
        code = run_cli(["--config", cfg, "kernel", "--gamma", 5, "--kappa", 10])
        assert code == 0
        assert (tmp_path / "o" / "kernel_modes.json").exists()

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert run_cli(["--config", cfg, "region"]) == cli.EXIT_CONFIG

    def test_corrupt_config_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert run_cli(["--config", cfg, "region"]) == cli.EXIT_CONFIG

    def test_bad_mu_exits_2(self, tmp_path):
        assert run_cli(["--mu", -1, "--out", tmp_path, "region"]) == cli.EXIT_CONFIG


class TestDeterminism:
    def test_verify_report_identical_across_processes(self, tmp_path):
        import subprocess
        import sys

        blobs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            proc = subprocess.run(
                [sys.executable, "-m", "rollwaves", "--out", str(out), "--n1", "32",
                 "--n2", "32", "verify", "--suite", "fast"],
                capture_output=True,
            )
            assert proc.returncode == 0, proc.stdout.decode() + proc.stderr.decode()
            blobs.append((out / "verify_fast.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_outputs_are_byte_identical_across_runs(self, tmp_path):
        blobs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert run_cli(["--out", out, "kernel", "--gamma", 5, "--kappa", 10]) == 0
            assert run_cli(
                ["--out", out, "solve", "--gamma", 5, "--kappa", 10, "--amplitude", 0.01]
            ) == 0
            blobs.append(
                (out / "kernel_modes.json").read_bytes()
                + (out / "branch_point.json").read_bytes()
                + (out / "eta.csv").read_bytes()
            )
        assert blobs[0] == blobs[1]


class TestSerialization:
    def test_field_records_roundtrip_exactly(self, rng):
        grid = TorusGrid(7.5, 3.25, 16, 16)
        field = random_field(grid, rng, parity="even", zero_mean=True)
        back = field_from_records(grid, field_to_records(field), parity="even", zero_mean=True)
        assert np.array_equal(back.coeffs, field.coeffs)

    def test_records_json_roundtrip_exactly(self, rng):
        grid = TorusGrid(7.5, 3.25, 16, 16)
        field = random_field(grid, rng)
        records = json.loads(json.dumps(field_to_records(field)))
        back = field_from_records(grid, records)
        assert np.array_equal(back.coeffs, field.coeffs)

    def test_branch_point_roundtrip(self, phys, drive_interior, basis64):
        from rollwaves import solve_branch_point

        bp = solve_branch_point(phys, drive_interior, basis64, 0.01, 0.3)
        data = json.loads(json.dumps(branch_point_to_dict(bp)))
        back = branch_point_from_dict(data)
        assert (back.state - bp.state).norm() <= 1e-13
        assert back.drive == bp.drive
        assert back.residual_norm == bp.residual_norm

    def test_probe_report_is_json_serializable(self, phys):
        from rollwaves import DriveParams, nonexistence_probe
        from rollwaves.serialize import probe_report_to_dict

        grid = TorusGrid(10.0, 10.0, 32, 32)
        report = nonexistence_probe(phys, DriveParams(5.0, 4.0), grid, n_trials=2, seed=3)
        data = json.loads(json.dumps(probe_report_to_dict(report)))
        assert data["all_trivial"] is True
        assert data["seeds"] == [3, 4]
        assert max(data["final_state_norms"]) <= 1e-12

    def test_csv_samples_reproduce_field(self, tmp_path, rng):
        from rollwaves.serialize import field_samples_to_csv
        from rollwaves.spectral import analyze

        grid = TorusGrid(7.5, 3.25, 16, 16)
        field = random_field(grid, rng)
        path = tmp_path / "field.csv"
        field_samples_to_csv(field, path)
        lines = path.read_text().strip().splitlines()[1:]
        samples = np.array([float(line.split(",")[2]) for line in lines]).reshape(grid.shape)
        back = analyze(grid, samples)
        assert np.max(np.abs(back.coeffs - field.coeffs)) <= 1e-13 * field.norm()
