"""Linearization of the traveling system at the flat state.

The linearized operator acting on a state (u, eta) is

    momentum:    -gamma d1 u + u - mu div(S u) + grad (1 - sigma Lap) eta - kappa eta e1
    continuity:  -gamma d1 eta + div u

with S u = grad u + grad u^T + 2 (div u) I, so that div(S u) = Lap u
+ 3 grad(div u).  On the frequency lattice it is block diagonal: one complex
3x3 matrix per mode acting on (u1^, u2^, eta^).  The free-surface reduction
is governed by the scalar symbol

    q(xi) = 2 pi i xi1 (gamma - kappa + 16 pi^2 mu gamma |xi|^2)
            - 4 pi^2 (|xi|^2 - gamma^2 xi1^2 + 4 pi^2 sigma |xi|^4),

which vanishes exactly at the kernel frequencies when the torus periods are
chosen by the period-length map.  This module provides the per-mode blocks,
the scalar reduction operators, the kernel basis and its lift to full
states, projections onto the kernel complement, and direct/pseudo solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .params import DriveParams, PhysicalParams, Region, classify, kernel_frequencies, period_lengths
from .spectral import (
    EVEN,
    ODD,
    ScalarField,
    TorusGrid,
    VectorField,
    apply_multiplier,
    inner_product,
    _riesz_pair_symbol,
    helmholtz_inverse,
)

VELOCITY_PARITY = (EVEN, ODD)

# Relative tolerance on the smallest singular value below which a per-mode
# block is counted as rank deficient.
RANK_DEFICIENCY_REL_TOL = 1e-8

# Condition-number cap for the direct per-mode solve.
FULL_SOLVE_COND_CAP = 1e12


@dataclass(frozen=True, eq=False)
class State:
    """Velocity pair plus free surface; the solution space has u1 even,
    u2 odd, eta even and zero-mean in x2."""

    u: VectorField
    eta: ScalarField

    @property
    def grid(self):
        return self.u.grid

    @classmethod
    def zeros(cls, grid, with_parity=True):
        if with_parity:
            return cls(
                VectorField.zeros(grid, velocity_parity=True),
                ScalarField.zeros(grid, EVEN, zero_mean=True),
            )
        return cls(VectorField.zeros(grid), ScalarField.zeros(grid, zero_mean=True))

    def norm(self) -> float:
        return math.sqrt(self.u.u1.norm() ** 2 + self.u.u2.norm() ** 2 + self.eta.norm() ** 2)

    def __add__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return State(self.u + other.u, self.eta + other.eta)

    def __sub__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return State(self.u - other.u, self.eta - other.eta)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return State(self.u * scalar, self.eta * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return State(-self.u, -self.eta)

    def has_velocity_parity(self) -> bool:
        return (self.u.u1.parity, self.u.u2.parity, self.eta.parity) == (EVEN, ODD, EVEN)


@dataclass(frozen=True, eq=False)
class Residual:
    """Momentum rows (vector) and continuity row (scalar, zero-mean)."""

    f: VectorField
    g: ScalarField

    @property
    def grid(self):
        return self.f.grid

    @classmethod
    def zeros(cls, grid, with_parity=True):
        if with_parity:
            return cls(
                VectorField.zeros(grid, velocity_parity=True),
                ScalarField.zeros(grid, EVEN, zero_mean=True),
            )
        return cls(VectorField.zeros(grid), ScalarField.zeros(grid, zero_mean=True))

    def norm(self) -> float:
        return math.sqrt(self.f.u1.norm() ** 2 + self.f.u2.norm() ** 2 + self.g.norm() ** 2)

    def __add__(self, other):
        if not isinstance(other, Residual):
            return NotImplemented
        return Residual(self.f + other.f, self.g + other.g)

    def __sub__(self, other):
        if not isinstance(other, Residual):
            return NotImplemented
        return Residual(self.f - other.f, self.g - other.g)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return Residual(self.f * scalar, self.g * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Residual(-self.f, -self.g)


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """Orthonormal free-surface kernel pair and its lift to full states."""

    phys: PhysicalParams
    drive: DriveParams
    grid: TorusGrid
    region: Region
    phi_plus: ScalarField
    phi_minus: ScalarField
    V_plus: State
    V_minus: State
    frequencies: tuple[tuple[float, float], ...]

    @property
    def mode_indices(self) -> tuple[tuple[int, int], ...]:
        """Array indices of the kernel modes on the grid."""
        out = []
        for xi1, xi2 in self.frequencies:
            k1 = round(xi1 * self.grid.L1)
            k2 = round(xi2 * self.grid.L2)
            out.append(self.grid.mode_index(k1, k2))
        return tuple(out)


# -- symbols and per-mode blocks ----------------------------------------------


def q_symbol(phys: PhysicalParams, drive: DriveParams, xi1, xi2):
    """Free-surface dispersion symbol; returns 0 at xi = 0 by convention."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    s = xi1 * xi1 + xi2 * xi2
    g, k = drive.gamma, drive.kappa
    imag = 2j * math.pi * xi1 * (g - k + 16.0 * math.pi ** 2 * phys.mu * g * s)
    real = -4.0 * math.pi ** 2 * (s - g * g * xi1 * xi1 + 4.0 * math.pi ** 2 * phys.sigma * s * s)
    out = imag + real
    if out.ndim == 0:
        return complex(out)
    return out


def mode_matrix(phys: PhysicalParams, drive: DriveParams, xi) -> np.ndarray:
    """The 3x3 block of the linearization at a single frequency.

    Rows are the two momentum equations then continuity; columns act on
    (u1^, u2^, eta^).  At xi = 0 the block reduces to the identity on the
    velocity modes; the eta slot there is excluded from the solution space
    by the zero-mean constraint and the continuity row is trivially zero.
    """
    table = _mode_table_at(phys, drive, float(xi[0]), float(xi[1]))
    return table


def _mode_blocks(phys, drive, xi1, xi2):
    """Vectorized 3x3 block assembly over frequency arrays."""
    mu, sigma = phys.mu, phys.sigma
    g, k = drive.gamma, drive.kappa
    d1 = 2j * math.pi * xi1
    d2 = 2j * math.pi * xi2
    s = 4.0 * math.pi ** 2 * (xi1 * xi1 + xi2 * xi2)
    visc_off = 12.0 * math.pi ** 2 * mu * xi1 * xi2
    base = 1.0 - g * d1 + mu * s
    out = np.zeros(xi1.shape + (3, 3), dtype=complex)
    out[..., 0, 0] = base + 12.0 * math.pi ** 2 * mu * xi1 * xi1
    out[..., 0, 1] = visc_off
    out[..., 0, 2] = d1 * (1.0 + sigma * s) - k
    out[..., 1, 0] = visc_off
    out[..., 1, 1] = base + 12.0 * math.pi ** 2 * mu * xi2 * xi2
    out[..., 1, 2] = d2 * (1.0 + sigma * s)
    out[..., 2, 0] = d1
    out[..., 2, 1] = d2
    out[..., 2, 2] = -g * d1
    return out


def _mode_table_at(phys, drive, xi1, xi2):
    return _mode_blocks(phys, drive, np.array(xi1), np.array(xi2))


@lru_cache(maxsize=64)
def mode_matrix_table(phys: PhysicalParams, drive: DriveParams, grid: TorusGrid) -> np.ndarray:
    """All per-mode blocks on the grid, shape (N1, N2, 3, 3); cached."""
    table = _mode_blocks(phys, drive, grid.xi1, grid.xi2)
    table.flags.writeable = False
    return table


def _stack_state(state: State) -> np.ndarray:
    return np.stack([state.u.u1.coeffs, state.u.u2.coeffs, state.eta.coeffs], axis=-1)


def apply_P(phys: PhysicalParams, drive: DriveParams, state: State) -> Residual:
    """Apply the linearized operator via the cached per-mode blocks."""
    grid = state.grid
    table = mode_matrix_table(phys, drive, grid)
    out = np.einsum("xyij,xyj->xyi", table, _stack_state(state))
    out[~grid.active] = 0.0
    tagged = state.has_velocity_parity()
    f = VectorField(
        ScalarField(grid, np.ascontiguousarray(out[..., 0]), EVEN if tagged else None),
        ScalarField(grid, np.ascontiguousarray(out[..., 1]), ODD if tagged else None),
    )
    g = ScalarField(
        grid, np.ascontiguousarray(out[..., 2]), EVEN if tagged else None, zero_mean=True
    )
    return Residual(f, g)


# -- scalar reduction operators -----------------------------------------------


def _require_zero_mean(field: ScalarField, label: str):
    if abs(field.coeffs[0, 0]) > 1e-12 * max(1.0, field.norm()):
        raise DomainError(f"{label} must have zero mean")


def apply_Q(phys: PhysicalParams, drive: DriveParams, eta: ScalarField) -> ScalarField:
    """Scalar free-surface operator: the multiplier q(xi) / (4 pi^2 |xi|^2)^2."""
    _require_zero_mean(eta, "free surface input")
    grid = eta.grid

    q = q_symbol(phys, drive, grid.xi1, grid.xi2)
    s = 4.0 * math.pi ** 2 * (grid.xi1 ** 2 + grid.xi2 ** 2)
    m = np.where(s > 0, q / np.where(s > 0, s * s, 1.0), 0.0)
    out = apply_multiplier(eta, m, xi2_parity=EVEN)
    return ScalarField(grid, out.coeffs, out.parity, True)


def apply_S(phys: PhysicalParams, gamma: float, residual: Residual) -> ScalarField:
    """Map a residual to the scalar obstruction field.

    Computes Lap^-2 [div f - (1 - gamma d1 - 4 mu Lap) g]; its coefficients
    at the kernel frequencies are exactly the range obstructions.
    """
    _require_zero_mean(residual.g, "continuity row")
    grid = residual.grid
    num = _reduction_numerator(phys, gamma, residual)
    s = 4.0 * math.pi ** 2 * (grid.xi1 ** 2 + grid.xi2 ** 2)
    coeffs = np.where(s > 0, num / np.where(s > 0, s * s, 1.0), 0.0)
    coeffs[~grid.active] = 0.0
    parity = EVEN if (residual.f.u1.parity, residual.f.u2.parity, residual.g.parity) == (
        EVEN,
        ODD,
        EVEN,
    ) else None
    return ScalarField(grid, coeffs, parity, True)


def _reduction_numerator(phys, gamma, residual):
    """Coefficients of div f - (1 - gamma d1 - 4 mu Lap) g (no Lap^-2 yet)."""
    grid = residual.grid
    d1 = 2j * math.pi * grid.xi1
    d2 = 2j * math.pi * grid.xi2
    s = 4.0 * math.pi ** 2 * (grid.xi1 ** 2 + grid.xi2 ** 2)
    return (
        d1 * residual.f.u1.coeffs
        + d2 * residual.f.u2.coeffs
        - (1.0 - gamma * d1 + 4.0 * phys.mu * s) * residual.g.coeffs
    )


# -- kernel machinery ----------------------------------------------------------


def lift_R(phys: PhysicalParams, drive: DriveParams, eta: ScalarField) -> State:
    """Reconstruct the velocity pair that pairs with a kernel-bound surface.

    u = kappa (1 - gamma d1 - mu Lap)^-1 P(eta e1) - gamma (R x R)(eta e1),
    with P the divergence-free projection and R the Riesz vector.  On
    surfaces supported at the kernel frequencies the result satisfies
    div u = gamma d1 eta and is annihilated by the linearized operator.
    """
    _require_zero_mean(eta, "free surface input")
    grid = eta.grid
    g, k = drive.gamma, drive.kappa
    r11 = _riesz_pair_symbol(grid, 1, 1)
    r12 = _riesz_pair_symbol(grid, 1, 2)
    p1 = eta + apply_multiplier(eta, r11, EVEN)          # first row of P(eta e1)
    p2 = apply_multiplier(eta, r12, ODD)                 # second row of P(eta e1)
    u1 = k * helmholtz_inverse(g, phys.mu, p1) - g * apply_multiplier(eta, r11, EVEN)
    u2 = k * helmholtz_inverse(g, phys.mu, p2) - g * apply_multiplier(eta, r12, ODD)
    return State(VectorField(u1, u2), ScalarField(grid, eta.coeffs, eta.parity, True))


def kernel_basis(phys: PhysicalParams, drive: DriveParams, grid: TorusGrid) -> KernelBasis:
    """Orthonormal kernel surfaces and their lifted states on the matched grid.

    Border points carry the one-dimensional pair
        sqrt(2/(L1 L2)) {cos, sin}(2 pi x1 / L1),
    interior points the two-dimensional pair
        sqrt(4/(L1 L2)) {cos, sin}(2 pi x1 / L1) cos(2 pi x2 / L2).
    The grid periods must equal the period-length map of (|gamma|, |kappa|).
    """
    region = classify(phys, drive)
    if not region.in_wave_region:
        raise DomainError(
            f"kernel basis requires (gamma, kappa) in the wave region, got {region.value}"
        )
    L1, L2 = period_lengths(phys, drive)
    for got, want, label in ((grid.L1, L1, "L1"), (grid.L2, L2, "L2")):
        if abs(got - want) > 1e-10 * max(abs(want), 1.0):
            raise DomainError(
                f"grid period {label} = {got} does not match the required {want}"
            )
    if region.is_border:
        # coefficients of sqrt(2/A) cos / sin at modes (+-1, 0)
        plus = {(1, 0): 0.5 * math.sqrt(2.0), (-1, 0): 0.5 * math.sqrt(2.0)}
        minus = {(1, 0): -0.5j * math.sqrt(2.0), (-1, 0): 0.5j * math.sqrt(2.0)}
    else:
        # coefficients of sqrt(4/A) cos cos / sin cos at modes (+-1, +-1)
        plus = {(s1, s2): 0.5 for s1 in (1, -1) for s2 in (1, -1)}
        minus = {(s1, s2): -0.5j * s1 for s1 in (1, -1) for s2 in (1, -1)}
    phi_plus = ScalarField.from_mode_dict(grid, plus, parity=EVEN, zero_mean=True)
    phi_minus = ScalarField.from_mode_dict(grid, minus, parity=EVEN, zero_mean=True)
    return KernelBasis(
        phys=phys,
        drive=drive,
        grid=grid,
        region=region,
        phi_plus=phi_plus,
        phi_minus=phi_minus,
        V_plus=lift_R(phys, drive, phi_plus),
        V_minus=lift_R(phys, drive, phi_minus),
        frequencies=kernel_frequencies(phys, drive),
    )


def project_kernel(basis: KernelBasis, eta: ScalarField) -> tuple[float, float]:
    """L^2 projections of a surface onto the orthonormal kernel pair."""
    return (inner_product(eta, basis.phi_plus), inner_product(eta, basis.phi_minus))


def project_Z(basis: KernelBasis, state: State) -> State:
    """Component of a state in the kernel complement.

    Subtracts the lifted kernel part and pins the surface coefficients at
    the kernel frequencies to zero, so state = lift(projection) + result
    reassembles exactly.
    """
    a_plus, a_minus = project_kernel(basis, state.eta)
    z = state - (a_plus * basis.V_plus + a_minus * basis.V_minus)
    coeffs = z.eta.coeffs.copy()
    for idx in basis.mode_indices:
        coeffs[idx] = 0.0
    return State(z.u, ScalarField(state.grid, coeffs, z.eta.parity, True))


def apply_Ps(state: State) -> Residual:
    """Wave-speed direction of the linearization: -(d1 u, d1 eta)."""
    from .spectral import derivative

    return Residual(
        VectorField(-derivative(state.u.u1, 1), -derivative(state.u.u2, 1)),
        -derivative(state.eta, 1),
    )


def apply_Pt(state: State) -> Residual:
    """Tilt direction of the linearization: -(eta e1, 0)."""
    grid = state.grid
    zero_f2 = ScalarField.zeros(grid, ODD if state.eta.parity == EVEN else None)
    zero_g = ScalarField.zeros(grid, state.eta.parity, zero_mean=True)
    return Residual(VectorField(-state.eta, zero_f2), zero_g)


# -- solves ---------------------------------------------------------------------


@lru_cache(maxsize=32)
def _full_inverse_table(phys: PhysicalParams, drive: DriveParams, grid: TorusGrid) -> np.ndarray:
    """Inverses of the per-mode blocks for use off the wave region.

    Raises SingularModeError if any retained block (xi != 0) has condition
    number beyond the cap.  The xi = 0 block is replaced by the identity on
    the velocity slots with the eta slot pinned to zero.
    """
    from .errors import SingularModeError

    table = np.array(mode_matrix_table(phys, drive, grid))
    active = grid.active.copy()
    active[0, 0] = False
    sv = np.linalg.svd(table[active], compute_uv=False)
    cond = sv[:, 0] / sv[:, -1]
    worst = float(np.max(cond)) if cond.size else 1.0
    if worst > FULL_SOLVE_COND_CAP:
        raise SingularModeError(
            f"per-mode block condition number {worst:.3e} exceeds {FULL_SOLVE_COND_CAP:.0e}; "
            "the drive parameters are too close to the wave region for a direct solve"
        )
    inv = np.zeros_like(table)
    inv[active] = np.linalg.inv(table[active])
    inv[0, 0] = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    inv.flags.writeable = False
    return inv


def _solve_full(phys, drive, rhs):
    grid = rhs.grid
    inv = _full_inverse_table(phys, drive, grid)
    rhs_stack = np.stack([rhs.f.u1.coeffs, rhs.f.u2.coeffs, rhs.g.coeffs], axis=-1)
    out = np.einsum("xyij,xyj->xyi", inv, rhs_stack)
    out[~grid.active] = 0.0
    tagged = (rhs.f.u1.parity, rhs.f.u2.parity, rhs.g.parity) == (EVEN, ODD, EVEN)
    return State(
        VectorField(
            ScalarField(grid, np.ascontiguousarray(out[..., 0]), EVEN if tagged else None),
            ScalarField(grid, np.ascontiguousarray(out[..., 1]), ODD if tagged else None),
        ),
        ScalarField(grid, np.ascontiguousarray(out[..., 2]), EVEN if tagged else None, True),
    )


def _solve_pseudo_on_Z(phys, drive, rhs):
    grid = rhs.grid
    g, k = drive.gamma, drive.kappa
    # Free surface: invert the scalar symbol off the kernel frequencies.
    num = _reduction_numerator(phys, g, rhs)
    q = q_symbol(phys, drive, grid.xi1, grid.xi2)
    eta_coeffs = np.zeros(grid.shape, dtype=complex)
    safe = grid.active.copy()
    safe[0, 0] = False
    for xi1, xi2 in kernel_frequencies(phys, drive):
        idx = grid.mode_index(round(xi1 * grid.L1), round(xi2 * grid.L2))
        safe[idx] = False
    eta_coeffs[safe] = num[safe] / q[safe]
    tagged = (rhs.f.u1.parity, rhs.f.u2.parity, rhs.g.parity) == (EVEN, ODD, EVEN)
    eta = ScalarField(grid, eta_coeffs, EVEN if tagged else None, True)
    # Velocity recovery:
    #   u = (1 - gamma d1 - mu Lap)^-1 (kappa P(eta e1) + P f)
    #       + gamma (I - P)(eta e1) + Lap^-1 grad g.
    r11 = _riesz_pair_symbol(grid, 1, 1)
    r12 = _riesz_pair_symbol(grid, 1, 2)
    s = 4.0 * math.pi ** 2 * (grid.xi1 ** 2 + grid.xi2 ** 2)
    inv_lap_d1 = np.where(s > 0, -2j * math.pi * grid.xi1 / np.where(s > 0, s, 1.0), 0.0)
    inv_lap_d2 = np.where(s > 0, -2j * math.pi * grid.xi2 / np.where(s > 0, s, 1.0), 0.0)

    pe1 = eta + apply_multiplier(eta, r11, EVEN)
    pe2 = apply_multiplier(eta, r12, ODD)
    pf1 = (
        rhs.f.u1
        + apply_multiplier(rhs.f.u1, r11, EVEN)
        + apply_multiplier(rhs.f.u2, r12, ODD)
    )
    r22 = _riesz_pair_symbol(grid, 2, 2)
    pf2 = (
        rhs.f.u2
        + apply_multiplier(rhs.f.u1, r12, ODD)
        + apply_multiplier(rhs.f.u2, r22, EVEN)
    )
    u1 = (
        helmholtz_inverse(g, phys.mu, k * pe1 + pf1)
        - g * apply_multiplier(eta, r11, EVEN)
        + apply_multiplier(rhs.g, inv_lap_d1, EVEN)
    )
    u2 = (
        helmholtz_inverse(g, phys.mu, k * pe2 + pf2)
        - g * apply_multiplier(eta, r12, ODD)
        + apply_multiplier(rhs.g, inv_lap_d2, ODD)
    )
    return State(VectorField(u1, u2), eta)


def solve_P(phys: PhysicalParams, drive: DriveParams, rhs: Residual, mode: str) -> State:
    """Solve the linearized problem.

    mode='full' requires drive outside the wave region; every retained mode
    is inverted directly and the output satisfies P out = rhs to roundoff.
    mode='pseudo_on_Z' requires drive in the wave region (or its mirror)
    with matched grid periods; the surface coefficients at the kernel
    frequencies are pinned to zero, the rest inverted through the scalar
    symbol, and the velocity recovered by the resolvent formula.  On
    right-hand sides in the range it reproduces the kernel-complement
    preimage exactly; otherwise it discards the two obstruction directions.
    """
    region = classify(phys, drive)
    if mode == "full":
        if region.in_wave_region:
            raise DomainError("direct solve requires drive outside the wave region")
        return _solve_full(phys, drive, rhs)
    if mode == "pseudo_on_Z":
        if not region.in_wave_region:
            raise DomainError("pseudo solve requires drive in the wave region")
        L1, L2 = period_lengths(phys, drive)
        grid = rhs.grid
        if abs(grid.L1 - L1) > 1e-10 * L1 or abs(grid.L2 - L2) > 1e-10 * L2:
            raise DomainError("pseudo solve requires grid periods matched to the drive")
        return _solve_pseudo_on_Z(phys, drive, rhs)
    raise ValueError(f"unknown solve mode {mode!r}")


def count_rank_deficient_modes(
    phys: PhysicalParams,
    drive: DriveParams,
    grid: TorusGrid,
    rel_tol: float = RANK_DEFICIENCY_REL_TOL,
):
    """Count retained modes (xi != 0) whose block is numerically singular.

    Returns (count, diagnostics) where diagnostics holds the smallest
    relative singular value over non-deficient modes and the indices of the
    deficient ones.
    """
    table = mode_matrix_table(phys, drive, grid)
    active = grid.active.copy()
    active[0, 0] = False
    sv = np.linalg.svd(table[active], compute_uv=False)
    rel = sv[:, -1] / sv[:, 0]
    deficient = rel < rel_tol
    idx_active = np.argwhere(active)
    diagnostics = {
        "deficient_indices": [tuple(map(int, idx)) for idx in idx_active[deficient]],
        "deficient_rel_sv": [float(v) for v in rel[deficient]],
        "min_rel_sv_elsewhere": float(np.min(rel[~deficient])) if np.any(~deficient) else None,
    }
    return int(np.count_nonzero(deficient)), diagnostics
