"""File-producing commands shared by the CLI and the verification suite."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, NoConvergence
from .linear import count_rank_deficient_modes, kernel_basis, mode_matrix_table
from .params import (
    DriveParams,
    PhysicalParams,
    classify,
    kernel_frequencies,
    period_lengths,
    region_boundary_scan,
)
from .serialize import (
    branch_point_to_dict,
    field_samples_to_csv,
    rows_to_csv,
    write_json,
)
from .solver import NewtonOptions, solve_branch_point
from .spectral import TorusGrid


@dataclass(frozen=True)
class RunConfig:
    """Validated global settings shared by all commands."""

    phys: PhysicalParams
    n1: int = 64
    n2: int = 64
    out: str = "rollwaves-out"
    seed: int = 12345
    jobs: int = 1
    options: NewtonOptions = NewtonOptions()

    def outdir(self) -> Path:
        path = Path(self.out)
        path.mkdir(parents=True, exist_ok=True)
        return path


DEFAULT_SWEEP_GAMMAS = (3.0, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.3, 9.8)


def run_region_scan(config: RunConfig, kappa_lo: float, kappa_hi: float, samples: int) -> Path:
    """Write region_boundary.csv covering the wave region and its mirror."""
    rows = region_boundary_scan(config.phys, kappa_lo, kappa_hi, samples)
    out = []
    for kappa, lo, hi in rows:
        out.append((kappa, lo, hi))
    # mirror branch: at tilt -kappa the admissible speeds are (-kappa, -gamma_min]
    for kappa, lo, _ in rows:
        out.append((-kappa, -kappa, -lo))
    path = config.outdir() / "region_boundary.csv"
    rows_to_csv("kappa,gamma_min,gamma_max", out, path)
    return path


def run_kernel_diagnostics(config: RunConfig, gamma: float, kappa: float) -> Path:
    """Write kernel_modes.json with the resonant modes and singular-value gaps."""
    phys = config.phys
    drive = DriveParams(gamma, kappa)
    region = classify(phys, drive)
    if not region.in_wave_region:
        raise DomainError(f"({gamma}, {kappa}) is outside the wave region")
    L1, L2 = period_lengths(phys, drive)
    grid = TorusGrid(L1, L2, config.n1, config.n2)
    freqs = kernel_frequencies(phys, drive)
    count, diag = count_rank_deficient_modes(phys, drive, grid)

    table = mode_matrix_table(phys, drive, grid)
    kernel_rel_sv = []
    for xi1, xi2 in freqs:
        idx = grid.mode_index(round(xi1 * L1), round(xi2 * L2))
        sv = np.linalg.svd(table[idx], compute_uv=False)
        kernel_rel_sv.append(float(sv[-1] / sv[0]))
    active = grid.active.copy()
    active[0, 0] = False
    all_sv = np.linalg.svd(table[active], compute_uv=False)
    conditions = all_sv[:, 0] / all_sv[:, -1]

    data = {
        "mu": phys.mu,
        "sigma": phys.sigma,
        "gamma": gamma,
        "kappa": kappa,
        "region": "border" if region.is_border else "interior",
        "mirror_branch": region.is_negative,
        "L1": L1,
        "L2": L2,
        "frequencies": [[x1, x2] for x1, x2 in freqs],
        "n_kernel_modes": len(freqs),
        "rank_deficient_count": count,
        "kernel_mode_rel_singular": kernel_rel_sv,
        "off_kernel_min_rel_singular": diag["min_rel_sv_elsewhere"],
        "max_mode_condition": float(np.max(conditions)),
    }
    path = config.outdir() / "kernel_modes.json"
    write_json(data, path)
    return path


def _solve_once(phys, gamma_star, kappa_star, amplitude, theta, n1, n2, opts):
    """One branch-point solve on its own matched grid; used by sweep workers."""
    drive = DriveParams(gamma_star, kappa_star)
    L1, L2 = period_lengths(phys, drive)
    basis = kernel_basis(phys, drive, TorusGrid(L1, L2, n1, n2))
    return solve_branch_point(phys, drive, basis, amplitude, theta, opts=opts)


def write_branch_point_files(bp, outdir: Path, stem: str = "branch_point") -> list[Path]:
    paths = [outdir / f"{stem}.json"]
    write_json(branch_point_to_dict(bp), paths[0])
    for name, field in (("eta", bp.state.eta), ("u1", bp.state.u.u1), ("u2", bp.state.u.u2)):
        path = outdir / f"{stem}_{name}.csv" if stem != "branch_point" else outdir / f"{name}.csv"
        field_samples_to_csv(field, path)
        paths.append(path)
    return paths


def run_single_solve(
    config: RunConfig, gamma_star: float, kappa_star: float, amplitude: float, theta: float
):
    """Solve one branch point and write its JSON record plus sample CSVs.

    Returns (branch_point, paths); on Newton failure the diagnostics are
    still written before the exception propagates.
    """
    outdir = config.outdir()
    try:
        bp = _solve_once(
            config.phys, gamma_star, kappa_star, amplitude, theta, config.n1, config.n2, config.options
        )
    except NoConvergence as err:
        write_branch_point_files(err.branch_point, outdir)
        raise
    paths = write_branch_point_files(bp, outdir)
    return bp, paths


def _sweep_entry(task):
    phys, gamma, kappa, amplitude, theta, n1, n2, opts = task
    try:
        bp = _solve_once(phys, gamma, kappa, amplitude, theta, n1, n2, opts)
        return bp, None
    except (NoConvergence, DomainError) as err:
        bp = getattr(err, "branch_point", None)
        return bp, str(err)


def run_sweep(
    config: RunConfig,
    kappa_star: float,
    gamma_list=DEFAULT_SWEEP_GAMMAS,
    amplitude: float = 0.02,
    theta: float = 0.0,
):
    """Solve one branch point per wave speed, each on its own matched grid.

    Writes sweep_summary.csv plus per-speed surface/velocity files; failures
    are recorded as rows with converged=False.  Returns the summary rows.
    """
    outdir = config.outdir()
    tasks = [
        (config.phys, g, kappa_star, amplitude, theta, config.n1, config.n2, config.options)
        for g in gamma_list
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_sweep_entry, tasks))
    else:
        results = [_sweep_entry(task) for task in tasks]

    rows = []
    n_ok = 0
    for index, ((bp, error), gamma) in enumerate(zip(results, gamma_list)):
        if bp is None:
            rows.append((gamma, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan, False))
            continue
        grid = bp.state.grid
        stem = f"solution_{index:02d}"
        write_branch_point_files(bp, outdir, stem=stem)
        rows.append(
            (
                gamma,
                grid.L1,
                grid.L2,
                bp.drive.gamma,
                bp.drive.kappa,
                bp.residual_norm,
                bp.state.eta.inf_norm(),
                bp.converged,
            )
        )
        if bp.converged and error is None:
            n_ok += 1
    rows_to_csv(
        "gamma,L1,L2,gamma_corrected,kappa_corrected,residual,max_eta,converged",
        rows,
        outdir / "sweep_summary.csv",
    )
    return rows, n_ok
