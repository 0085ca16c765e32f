"""Branch-point solver tests.

The solves are their own oracle (residual of the governing system), with
cross-checks at doubled resolution, the local symmetries of the branch,
and re-convergence from perturbed starts.
"""

import math

import numpy as np
import pytest

import rollwaves.solver as solver_mod
from rollwaves import (
    DomainError,
    DriveParams,
    NewtonOptions,
    ProbeFailure,
    TorusGrid,
    continue_branch,
    nonexistence_probe,
    reflect_solution,
    residual,
    solve_branch_point,
)
from rollwaves.linear import project_kernel, project_Z
from rollwaves.solver import default_basis
from rollwaves.spectral import inner_product

from conftest import make_random_state


class TestSolveBranchPoint:
    def test_zero_amplitude_is_trivial(self, phys, drive_interior, basis64):
        bp = solve_branch_point(phys, drive_interior, basis64, 0.0, 0.3)
        assert bp.converged
        assert bp.newton_iters == 0
        assert bp.residual_norm == 0.0
        assert bp.state.norm() == 0.0
        assert bp.drive == drive_interior

    def test_reference_point_converges(self, phys, drive_interior, basis64):
        bp = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.0)
        assert bp.converged
        assert bp.residual_norm <= 1e-10
        assert bp.constraint_violation <= 1e-12
        a_plus, a_minus = project_kernel(basis64, bp.state.eta)
        assert a_plus == pytest.approx(0.02, abs=1e-12)
        assert abs(a_minus) <= 1e-12

    def test_surface_dominated_by_kernel_modes(self, phys, drive_interior, basis64):
        bp = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.0)
        coeffs = np.abs(bp.state.eta.coeffs)
        kernel_mass = sum(coeffs[idx] ** 2 for idx in basis64.mode_indices)
        assert kernel_mass / np.sum(coeffs**2) > 0.99

    def test_nontrivial_surface_for_nonzero_amplitude(self, phys, drive_interior, basis64):
        for a in (0.001, -0.02):
            bp = solve_branch_point(phys, drive_interior, basis64, a, 0.0)
            assert bp.state.eta.norm() > 0

    def test_resolution_doubling_agreement(self, phys, drive_interior, basis64):
        coarse = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.0)
        fine_basis = default_basis(phys, drive_interior, 128, 128)
        fine = solve_branch_point(phys, drive_interior, fine_basis, 0.02, 0.0)
        assert fine.drive.gamma == pytest.approx(coarse.drive.gamma, abs=1e-8)
        assert fine.drive.kappa == pytest.approx(coarse.drive.kappa, abs=1e-8)
        assert fine.state.eta.inf_norm() == pytest.approx(
            coarse.state.eta.inf_norm(), abs=1e-8
        )

    def test_phase_is_translation(self, phys, drive_interior, basis64):
        # the equations are autonomous in x1, so the theta-branch is the
        # x1-translate of the theta=0 branch by s = theta L1 / (2 pi)
        import numpy as np

        theta = 0.7
        base = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.0)
        rotated = solve_branch_point(phys, drive_interior, basis64, 0.02, theta)
        grid = basis64.grid
        shift = np.exp(-2j * np.pi * grid.xi1 * (theta * grid.L1 / (2 * np.pi)))

        def translate(field):
            from rollwaves.spectral import ScalarField

            return ScalarField(grid, field.coeffs * shift, None, field.zero_mean)

        assert (translate(base.state.eta) - rotated.state.eta).norm() <= 1e-10
        assert (translate(base.state.u.u1) - rotated.state.u.u1).norm() <= 1e-10
        assert rotated.drive.gamma == pytest.approx(base.drive.gamma, abs=1e-10)

    def test_theta_shift_matches_negated_amplitude(self, phys, drive_interior, basis64):
        shifted = solve_branch_point(phys, drive_interior, basis64, 0.02, math.pi)
        negated = solve_branch_point(phys, drive_interior, basis64, -0.02, 0.0)
        assert (shifted.state - negated.state).norm() <= 1e-10

    def test_quadratic_convergence_constant(self, phys, drive_interior, basis64):
        # compare r_k <= C r_{k-1}^2 on the last pair above the roundoff
        # floor; C should be stable across amplitudes
        constants = []
        for a in (0.01, 0.02, 0.05):
            bp = solve_branch_point(phys, drive_interior, basis64, a, 0.0)
            history = [r for r in bp.residual_history if r > 1e-15]
            assert len(history) >= 2
            constants.append(history[-1] / history[-2] ** 2)
        assert all(c <= 100.0 for c in constants)
        assert max(constants) / min(constants) <= 3.0

    def test_local_uniqueness_under_Z_perturbation(self, phys, drive_interior, basis64, rng):
        a = 0.02
        bp = solve_branch_point(phys, drive_interior, basis64, a, 0.0)
        noise = project_Z(basis64, make_random_state(basis64.grid, rng))
        noise = noise * (0.1 * a / noise.norm())
        perturbed = solve_branch_point(
            phys,
            drive_interior,
            basis64,
            a,
            0.0,
            warm_start=(bp.state + noise, bp.drive),
        )
        assert (perturbed.state - bp.state).norm() <= 1e-8

    def test_damped_first_step_still_converges(self, phys, drive_interior, basis64):
        opts = NewtonOptions(damping=0.5)
        bp = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.0, opts=opts)
        assert bp.converged and bp.residual_norm <= 1e-10

    def test_options_validation(self):
        with pytest.raises(DomainError):
            NewtonOptions(tol_residual=0.0)
        with pytest.raises(DomainError):
            NewtonOptions(max_iter=0)
        with pytest.raises(DomainError):
            NewtonOptions(damping=-0.5)

    def test_amplitude_cap(self, phys, drive_interior, basis64):
        with pytest.raises(DomainError):
            solve_branch_point(phys, drive_interior, basis64, 0.5, 0.0)

    def test_basis_drive_mismatch(self, phys, drive_interior, basis64):
        with pytest.raises(DomainError):
            solve_branch_point(phys, DriveParams(4.0, 10.0), basis64, 0.02, 0.0)

    def test_outside_region_rejected(self, phys, basis64):
        with pytest.raises(DomainError):
            solve_branch_point(phys, DriveParams(0.5, 10.0), basis64, 0.02, 0.0)


class TestContinueBranch:
    def test_six_point_sweep(self, phys, drive_interior, basis64):
        a_list = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05)
        points = continue_branch(phys, drive_interior, basis64, 0.0, a_list)
        assert len(points) == 6
        assert all(bp.converged for bp in points)
        assert all(bp.residual_norm <= 1e-10 for bp in points)

    def test_drift_and_corrector_scale_quadratically(self, phys, drive_interior, basis64):
        # the drive drift and kernel-complement part are both even in the
        # amplitude (half-period translation symmetry), hence quadratic at
        # leading order
        a_list = (0.0025, 0.005, 0.01, 0.02)
        points = continue_branch(phys, drive_interior, basis64, 0.0, a_list)
        drifts = [bp.drift for bp in points]
        z_norms = [project_Z(basis64, bp.state).norm() for bp in points]
        log_a = np.log(a_list)
        drift_slope = np.polyfit(log_a, np.log(drifts), 1)[0]
        z_slope = np.polyfit(log_a, np.log(z_norms), 1)[0]
        assert drift_slope == pytest.approx(2.0, abs=0.05)
        assert z_slope == pytest.approx(2.0, abs=0.05)

    def test_rejects_unsorted_amplitudes(self, phys, drive_interior, basis64):
        with pytest.raises(DomainError):
            continue_branch(phys, drive_interior, basis64, 0.0, (0.01, 0.005))

    def test_failure_is_recorded_not_raised(self, phys, drive_interior, basis64):
        opts = NewtonOptions(max_iter=1, tol_residual=1e-14)
        points = continue_branch(
            phys, drive_interior, basis64, 0.0, (0.02, 0.05), opts=opts
        )
        assert 1 <= len(points) <= 2
        assert not points[-1].converged


class TestNonexistenceProbe:
    def test_probes_relax_to_zero(self, phys):
        grid = TorusGrid(10.0, 10.0, 64, 64)
        for gamma, kappa in ((0.5, 10.0), (5.0, 4.0), (5.0, -10.0)):
            report = nonexistence_probe(
                phys, DriveParams(gamma, kappa), grid, n_trials=3, seed=7
            )
            assert report.all_trivial
            assert max(report.final_state_norms) <= 1e-12
            assert report.seeds == (7, 8, 9)

    def test_rejects_wave_region_drive(self, phys, drive_interior):
        grid = TorusGrid(10.0, 10.0, 32, 32)
        with pytest.raises(DomainError):
            nonexistence_probe(phys, drive_interior, grid, n_trials=1)

    def test_nonzero_endpoint_raises_probe_failure(self, phys, monkeypatch):
        grid = TorusGrid(10.0, 10.0, 32, 32)

        def fake_newton(phys_, drive_, state, opts_, tol_):
            return state, 0.0, 1  # pretends Newton settled on the starting state

        monkeypatch.setattr(solver_mod, "_fixed_drive_newton", fake_newton)
        with pytest.raises(ProbeFailure):
            nonexistence_probe(phys, DriveParams(0.5, 10.0), grid, n_trials=1)


class TestReflection:
    def test_double_reflection_is_identity(self, phys, drive_interior, basis64):
        bp = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.4)
        back = reflect_solution(reflect_solution(bp))
        assert (back.state - bp.state).norm() == 0.0
        assert back.drive == bp.drive

    def test_reflected_point_solves_negated_drive(self, phys, drive_interior, basis64):
        bp = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.0)
        mirrored = reflect_solution(bp)
        assert mirrored.drive.gamma == -bp.drive.gamma
        assert mirrored.drive.kappa == -bp.drive.kappa
        assert mirrored.residual_norm <= 1e-10
        # independent recomputation
        assert residual(phys, mirrored.drive, mirrored.state).norm() <= 1e-10

    def test_residual_norm_matches_original(self, phys, drive_interior, basis64):
        bp = solve_branch_point(phys, drive_interior, basis64, 0.02, 0.7)
        mirrored = reflect_solution(bp)
        assert mirrored.residual_norm == pytest.approx(bp.residual_norm, abs=1e-13)

    def test_kernel_projection_transformation(self, phys, drive_interior, basis64):
        theta = 0.7
        bp = solve_branch_point(phys, drive_interior, basis64, 0.02, theta)
        mirrored = reflect_solution(bp)
        plus = inner_product(mirrored.state.eta, basis64.phi_plus)
        minus = inner_product(mirrored.state.eta, basis64.phi_minus)
        assert plus == pytest.approx(0.02 * math.cos(theta), abs=1e-12)
        assert minus == pytest.approx(-0.02 * math.sin(theta), abs=1e-12)

    def test_direct_negative_drive_solve_matches_reflection(self, phys, drive_interior):
        negated = drive_interior.negated()
        basis_neg = default_basis(phys, negated, 64, 64)
        direct = solve_branch_point(phys, negated, basis_neg, 0.02, 0.0)
        mirrored = reflect_solution(
            solve_branch_point(phys, drive_interior, default_basis(phys, drive_interior, 64, 64), 0.02, 0.0)
        )
        assert (direct.state - mirrored.state).norm() <= 1e-10
        assert direct.drive.gamma == pytest.approx(mirrored.drive.gamma, abs=1e-12)


class TestBorderBranch:
    def test_negative_border_terminus_solves(self, phys, drive_border):
        negated = drive_border.negated()
        basis = default_basis(phys, negated, 64, 64)
        bp = solve_branch_point(phys, negated, basis, 0.02, 0.0)
        assert bp.converged and bp.residual_norm <= 1e-10

    def test_border_solution_is_one_dimensional(self, phys, drive_border, border_basis64):
        bp = solve_branch_point(phys, drive_border, border_basis64, 0.02, 0.0)
        assert bp.converged
        coeffs = bp.state.eta.coeffs
        transverse = np.sum(np.abs(coeffs[:, border_basis64.grid.k2 != 0]) ** 2)
        total = np.sum(np.abs(coeffs) ** 2)
        assert transverse / total <= 10.0 * bp.amplitude**2
