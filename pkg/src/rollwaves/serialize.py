"""File formats: CSV for human-facing samples, JSON for structured records.

Floats are written with repr (shortest round-trip form), so re-reading a
record reproduces the original binary64 values exactly.  All record writers
emit keys in sorted order and rows in deterministic index order, which makes
outputs byte-identical across runs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .linear import State
from .params import DriveParams, PhysicalParams
from .solver import BranchPoint, ProbeReport
from .spectral import EVEN, ODD, ScalarField, TorusGrid, VectorField


def _fmt(x: float) -> str:
    return repr(float(x))


# -- CSV ------------------------------------------------------------------------


def field_samples_to_csv(field: ScalarField, path) -> None:
    """Write physical samples row-major with header x1,x2,value."""
    grid = field.grid
    samples = field.samples()
    x1 = grid.L1 * np.arange(grid.N1) / grid.N1
    x2 = grid.L2 * np.arange(grid.N2) / grid.N2
    lines = ["x1,x2,value"]
    for i in range(grid.N1):
        for j in range(grid.N2):
            lines.append(f"{_fmt(x1[i])},{_fmt(x2[j])},{_fmt(samples[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def rows_to_csv(header: str, rows, path) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


# -- spectral coefficient records -------------------------------------------------


def field_to_records(field: ScalarField) -> list[dict]:
    """Nonzero spectral coefficients as {xi1, xi2, re, im} records."""
    grid = field.grid
    records = []
    for k1 in sorted(grid.k1.tolist()):
        for k2 in sorted(grid.k2.tolist()):
            c = field.coeffs[grid.mode_index(k1, k2)]
            if c != 0.0:
                records.append(
                    {
                        "xi1": k1 / grid.L1,
                        "xi2": k2 / grid.L2,
                        "re": float(c.real),
                        "im": float(c.imag),
                    }
                )
    return records


def field_from_records(grid: TorusGrid, records, parity=None, zero_mean=False) -> ScalarField:
    coeffs = np.zeros(grid.shape, dtype=complex)
    for rec in records:
        k1 = round(rec["xi1"] * grid.L1)
        k2 = round(rec["xi2"] * grid.L2)
        coeffs[grid.mode_index(k1, k2)] = rec["re"] + 1j * rec["im"]
    return ScalarField(grid, coeffs, parity, zero_mean)


# -- branch points ----------------------------------------------------------------


def grid_to_dict(grid: TorusGrid) -> dict:
    return {"L1": grid.L1, "L2": grid.L2, "N1": grid.N1, "N2": grid.N2}


def grid_from_dict(d: dict) -> TorusGrid:
    return TorusGrid(d["L1"], d["L2"], d["N1"], d["N2"])


def branch_point_to_dict(bp: BranchPoint) -> dict:
    from .spectral import tail_mass_fraction

    return {
        "mu": bp.phys.mu,
        "sigma": bp.phys.sigma,
        "spectral_tail_fraction": tail_mass_fraction(bp.state.eta),
        "amplitude": bp.amplitude,
        "theta": bp.theta,
        "gamma_star": bp.drive_star.gamma,
        "kappa_star": bp.drive_star.kappa,
        "gamma": bp.drive.gamma,
        "kappa": bp.drive.kappa,
        "residual_norm": bp.residual_norm,
        "newton_iters": bp.newton_iters,
        "converged": bp.converged,
        "constraint_violation": bp.constraint_violation,
        "residual_history": list(bp.residual_history),
        "grid": grid_to_dict(bp.state.grid),
        "fields": {
            "u1": field_to_records(bp.state.u.u1),
            "u2": field_to_records(bp.state.u.u2),
            "eta": field_to_records(bp.state.eta),
        },
    }


def branch_point_from_dict(data: dict) -> BranchPoint:
    grid = grid_from_dict(data["grid"])
    state = State(
        VectorField(
            field_from_records(grid, data["fields"]["u1"], parity=EVEN),
            field_from_records(grid, data["fields"]["u2"], parity=ODD),
        ),
        field_from_records(grid, data["fields"]["eta"], parity=EVEN, zero_mean=True),
    )
    return BranchPoint(
        phys=PhysicalParams(data["mu"], data["sigma"]),
        amplitude=data["amplitude"],
        theta=data["theta"],
        drive_star=DriveParams(data["gamma_star"], data["kappa_star"]),
        drive=DriveParams(data["gamma"], data["kappa"]),
        state=state,
        residual_norm=data["residual_norm"],
        newton_iters=data["newton_iters"],
        converged=data["converged"],
        residual_history=tuple(data["residual_history"]),
        constraint_violation=data["constraint_violation"],
    )


def probe_report_to_dict(report: ProbeReport) -> dict:
    return {
        "gamma": report.drive.gamma,
        "kappa": report.drive.kappa,
        "grid": grid_to_dict(report.grid),
        "n_trials": report.n_trials,
        "init_norm": report.init_norm,
        "seed": report.seed,
        "seeds": list(report.seeds),
        "final_state_norms": list(report.final_state_norms),
        "final_residuals": list(report.final_residuals),
        "newton_iters": list(report.newton_iters),
        "all_trivial": report.all_trivial,
    }


def write_json(data, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
