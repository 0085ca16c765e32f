"""The nonlinear part of the traveling system and its derivatives.

Acting on a state (u, eta) with drive parameters (gamma, kappa), the
nonlinear operator contributes

    momentum:    (1 + eta) u . grad u - gamma eta d1 u
                 - mu div(eta S u) + eta grad (1 - sigma Lap) eta
    continuity:  div(eta u)

so the full traveling system reads (linear part) + (this) = 0.  Every term
is bilinear or trilinear, so exact directional derivatives follow from the
product rule and are assembled here term by term; no finite differencing is
used inside Newton.

Products are evaluated pointwise on a single 2x-padded workspace, which is
alias-free for triple products (and a fortiori for pairs), then truncated
back to the retained band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .params import DriveParams, PhysicalParams
from .spectral import (
    EVEN,
    ODD,
    PaddedWorkspace,
    ScalarField,
    TorusGrid,
    VectorField,
    cubic_workspace,
    dealiased_product,
    derivative,
)
from .linear import Residual, State, apply_P, apply_Ps, apply_Pt


@dataclass(frozen=True, eq=False)
class ResidualMapContext:
    """Per-grid scratch shared by nonlinear evaluations: derivative symbols
    on the coarse lattice and the padded product workspace."""

    phys: PhysicalParams
    grid: TorusGrid

    @cached_property
    def d1(self) -> np.ndarray:
        return 2j * math.pi * self.grid.xi1

    @cached_property
    def d2(self) -> np.ndarray:
        return 2j * math.pi * self.grid.xi2

    @cached_property
    def pressure1(self) -> np.ndarray:
        """Symbol of d1 (1 - sigma Lap)."""
        s = 4.0 * math.pi ** 2 * (self.grid.xi1 ** 2 + self.grid.xi2 ** 2)
        return self.d1 * (1.0 + self.phys.sigma * s)

    @cached_property
    def pressure2(self) -> np.ndarray:
        s = 4.0 * math.pi ** 2 * (self.grid.xi1 ** 2 + self.grid.xi2 ** 2)
        return self.d2 * (1.0 + self.phys.sigma * s)

    @property
    def workspace(self) -> PaddedWorkspace:
        return cubic_workspace(self.grid)


@lru_cache(maxsize=16)
def get_context(phys: PhysicalParams, grid: TorusGrid) -> ResidualMapContext:
    return ResidualMapContext(phys, grid)


class _PointwiseState:
    """Padded-grid samples of everything the nonlinearity needs from a state."""

    def __init__(self, ctx: ResidualMapContext, state: State):
        ws = ctx.workspace
        cu1 = state.u.u1.coeffs
        cu2 = state.u.u2.coeffs
        ce = state.eta.coeffs
        self.eta = ws.synthesize(ce)
        self.u1 = ws.synthesize(cu1)
        self.u2 = ws.synthesize(cu2)
        self.d11 = ws.synthesize(ctx.d1 * cu1)   # d1 u1
        self.d12 = ws.synthesize(ctx.d2 * cu1)   # d2 u1
        self.d21 = ws.synthesize(ctx.d1 * cu2)   # d1 u2
        self.d22 = ws.synthesize(ctx.d2 * cu2)   # d2 u2
        self.p1 = ws.synthesize(ctx.pressure1 * ce)
        self.p2 = ws.synthesize(ctx.pressure2 * ce)
        # stress tensor entries: S11 = 4 d1u1 + 2 d2u2, S12 = d1u2 + d2u1,
        # S22 = 2 d1u1 + 4 d2u2
        self.s11 = 4.0 * self.d11 + 2.0 * self.d22
        self.s12 = self.d21 + self.d12
        self.s22 = 2.0 * self.d11 + 4.0 * self.d22

    def advection(self, component: int) -> np.ndarray:
        """u . grad u_component on the padded grid."""
        if component == 1:
            return self.u1 * self.d11 + self.u2 * self.d12
        return self.u1 * self.d21 + self.u2 * self.d22


def _assemble_residual(ctx, tagged, mom1, mom2, es11, es12, es22, cont1, cont2):
    """Project padded pointwise terms back and finish with coarse multipliers."""
    ws = ctx.workspace
    mu = ctx.phys.mu
    grid = ctx.grid
    f1 = ws.analyze(mom1) - mu * (ctx.d1 * ws.analyze(es11) + ctx.d2 * ws.analyze(es12))
    f2 = ws.analyze(mom2) - mu * (ctx.d1 * ws.analyze(es12) + ctx.d2 * ws.analyze(es22))
    g = ctx.d1 * ws.analyze(cont1) + ctx.d2 * ws.analyze(cont2)
    g[~grid.active] = 0.0
    return Residual(
        VectorField(
            ScalarField(grid, f1, EVEN if tagged else None),
            ScalarField(grid, f2, ODD if tagged else None),
        ),
        ScalarField(grid, g, EVEN if tagged else None, zero_mean=True),
    )


def apply_N(phys: PhysicalParams, drive: DriveParams, state: State) -> Residual:
    """Evaluate the nonlinear operator; parity preserving on tagged states."""
    ctx = get_context(phys, state.grid)
    b = _PointwiseState(ctx, state)
    g = drive.gamma
    one_plus = 1.0 + b.eta
    mom1 = one_plus * b.advection(1) - g * b.eta * b.d11 + b.eta * b.p1
    mom2 = one_plus * b.advection(2) - g * b.eta * b.d21 + b.eta * b.p2
    return _assemble_residual(
        ctx,
        state.has_velocity_parity(),
        mom1,
        mom2,
        b.eta * b.s11,
        b.eta * b.s12,
        b.eta * b.s22,
        b.eta * b.u1,
        b.eta * b.u2,
    )


def residual(phys: PhysicalParams, drive: DriveParams, state: State) -> Residual:
    """Full traveling-system residual: linear part plus nonlinearity."""
    return apply_P(phys, drive, state) + apply_N(phys, drive, state)


class LinearizedN:
    """Directional derivative of the nonlinearity at a fixed base state.

    The base-dependent padded samples are computed once at construction, so
    repeated applications (one per Krylov iteration) only transform the
    direction.
    """

    def __init__(self, phys: PhysicalParams, drive: DriveParams, base: State):
        self.ctx = get_context(phys, base.grid)
        self.gamma = drive.gamma
        self.base = _PointwiseState(self.ctx, base)
        self.tagged = base.has_velocity_parity()

    def apply(self, direction: State) -> Residual:
        ctx = self.ctx
        b = self.base
        d = _PointwiseState(ctx, direction)
        g = self.gamma
        one_plus = 1.0 + b.eta
        # product rule through (1 + eta) u . grad u - gamma eta d1 u
        cross1 = b.u1 * d.d11 + b.u2 * d.d12 + d.u1 * b.d11 + d.u2 * b.d12
        cross2 = b.u1 * d.d21 + b.u2 * d.d22 + d.u1 * b.d21 + d.u2 * b.d22
        mom1 = (
            one_plus * cross1
            + d.eta * b.advection(1)
            - g * (d.eta * b.d11 + b.eta * d.d11)
            + d.eta * b.p1
            + b.eta * d.p1
        )
        mom2 = (
            one_plus * cross2
            + d.eta * b.advection(2)
            - g * (d.eta * b.d21 + b.eta * d.d21)
            + d.eta * b.p2
            + b.eta * d.p2
        )
        return _assemble_residual(
            ctx,
            self.tagged and direction.has_velocity_parity(),
            mom1,
            mom2,
            d.eta * b.s11 + b.eta * d.s11,
            d.eta * b.s12 + b.eta * d.s12,
            d.eta * b.s22 + b.eta * d.s22,
            d.eta * b.u1 + b.eta * d.u1,
            d.eta * b.u2 + b.eta * d.u2,
        )


def apply_DN(phys: PhysicalParams, drive: DriveParams, base: State, direction: State) -> Residual:
    """Exact directional derivative of the nonlinearity at base."""
    return LinearizedN(phys, drive, base).apply(direction)


def apply_DJ(phys: PhysicalParams, drive: DriveParams, base: State, direction: State) -> Residual:
    """Action of the full state Jacobian: linear part plus nonlinear derivative."""
    return apply_P(phys, drive, direction) + apply_DN(phys, drive, base, direction)


def jac_gamma(state: State) -> Residual:
    """Wave-speed column of the residual Jacobian: -((1 + eta) d1 u, d1 eta)."""
    du1 = derivative(state.u.u1, 1)
    du2 = derivative(state.u.u2, 1)
    f1 = -du1 - dealiased_product(state.eta, du1)
    f2 = -du2 - dealiased_product(state.eta, du2)
    return Residual(VectorField(f1, f2), -derivative(state.eta, 1))


def jac_kappa(state: State) -> Residual:
    """Tilt column of the residual Jacobian; the nonlinearity is tilt-free."""
    return apply_Pt(state)


__all__ = [
    "ResidualMapContext",
    "get_context",
    "apply_N",
    "residual",
    "LinearizedN",
    "apply_DN",
    "apply_DJ",
    "jac_gamma",
    "jac_kappa",
    "apply_Ps",
    "apply_Pt",
]
