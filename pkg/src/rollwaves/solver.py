"""Newton-Krylov construction of roll-wave branch points.

A branch point at amplitude a and kernel phase theta solves the square
bordered system whose unknowns are the full state together with the two
drive parameters,

    residual(gamma, kappa, state) = 0,
    <eta, phi+> = a cos(theta),      <eta, phi-> = a sin(theta),

by Newton iteration with the exact Jacobian.  Each linear solve is a
matrix-free GMRES iteration preconditioned by an approximate inverse built
from the kernel-complement pseudo-solve at the terminus drive: the two
obstruction directions are absorbed by the parameter columns and the two
kernel directions by the constraint rows, so the preconditioned operator is
a small perturbation of the identity at small amplitude.

Nonexistence probes run the same Newton machinery at fixed drive outside
the wave region, on states without parity restrictions, preconditioned by
the direct per-mode inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import DomainError, NoConvergence, ProbeFailure
from .linear import (
    KernelBasis,
    Residual,
    State,
    apply_P,
    kernel_basis,
    solve_P,
)
from .nonlinear import LinearizedN, jac_gamma, jac_kappa, residual
from .params import DriveParams, PhysicalParams, classify
from .spectral import (
    EVEN,
    ODD,
    ScalarField,
    TorusGrid,
    VectorField,
    inner_product,
    random_field,
    reflect_x1,
)


@dataclass(frozen=True)
class NewtonOptions:
    """Newton and Krylov controls.

    tol_residual is absolute on the discrete L^2 residual norm; damping is
    the fraction of the first Newton step taken (later steps are full).
    """

    tol_residual: float = 1e-10
    max_iter: int = 25
    krylov_tol: float = 1e-12
    krylov_max: int = 500
    damping: float = 1.0

    def __post_init__(self):
        if not (0 < self.tol_residual < 1):
            raise DomainError(f"tol_residual must be in (0, 1), got {self.tol_residual}")
        for name in ("max_iter", "krylov_tol", "krylov_max", "damping"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class BranchPoint:
    """One computed roll wave and its solve diagnostics."""

    phys: PhysicalParams
    amplitude: float
    theta: float
    drive_star: DriveParams
    drive: DriveParams
    state: State
    residual_norm: float
    newton_iters: int
    converged: bool
    residual_history: tuple[float, ...] = ()
    constraint_violation: float = 0.0

    @property
    def drift(self) -> float:
        """Euclidean distance of the corrected drive from the terminus."""
        return math.hypot(
            self.drive.gamma - self.drive_star.gamma,
            self.drive.kappa - self.drive_star.kappa,
        )


@dataclass(frozen=True)
class ProbeReport:
    """Outcome of the local-uniqueness probe at one drive point."""

    drive: DriveParams
    grid: TorusGrid
    n_trials: int
    init_norm: float
    seed: int
    seeds: tuple[int, ...]
    final_state_norms: tuple[float, ...]
    final_residuals: tuple[float, ...]
    newton_iters: tuple[int, ...]
    all_trivial: bool


# -- packing between field objects and flat real vectors -----------------------


def _coeffs_to_flat(coeffs: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(coeffs).view(np.float64).ravel()


def _flat_to_coeffs(flat: np.ndarray, shape) -> np.ndarray:
    n1, n2 = shape
    return np.ascontiguousarray(flat).reshape(n1, 2 * n2).view(np.complex128)


def _pack_state(state: State, extra=()) -> np.ndarray:
    parts = [
        _coeffs_to_flat(state.u.u1.coeffs),
        _coeffs_to_flat(state.u.u2.coeffs),
        _coeffs_to_flat(state.eta.coeffs),
    ]
    if len(extra):
        parts.append(np.asarray(extra, dtype=np.float64))
    return np.concatenate(parts)


def _pack_residual(res: Residual, extra=()) -> np.ndarray:
    parts = [
        _coeffs_to_flat(res.f.u1.coeffs),
        _coeffs_to_flat(res.f.u2.coeffs),
        _coeffs_to_flat(res.g.coeffs),
    ]
    if len(extra):
        parts.append(np.asarray(extra, dtype=np.float64))
    return np.concatenate(parts)


def _unpack_fields(grid: TorusGrid, x: np.ndarray, n_extra: int, tagged: bool):
    n = 2 * grid.N1 * grid.N2
    blocks = [_flat_to_coeffs(x[i * n : (i + 1) * n], grid.shape) for i in range(3)]
    extra = tuple(float(v) for v in x[3 * n : 3 * n + n_extra])
    if tagged:
        parities = (EVEN, ODD, EVEN)
    else:
        parities = (None, None, None)
    return blocks, parities, extra


def _unpack_state(grid, x, n_extra=0, tagged=True):
    blocks, parities, extra = _unpack_fields(grid, x, n_extra, tagged)
    state = State(
        VectorField(
            ScalarField(grid, blocks[0], parities[0]),
            ScalarField(grid, blocks[1], parities[1]),
        ),
        ScalarField(grid, blocks[2], parities[2], zero_mean=True),
    )
    return (state, extra) if n_extra else state


def _unpack_residual(grid, x, n_extra=0, tagged=True):
    blocks, parities, extra = _unpack_fields(grid, x, n_extra, tagged)
    res = Residual(
        VectorField(
            ScalarField(grid, blocks[0], parities[0]),
            ScalarField(grid, blocks[1], parities[1]),
        ),
        ScalarField(grid, blocks[2], parities[2], zero_mean=True),
    )
    return (res, extra) if n_extra else res


def _run_gmres(op, rhs, precond, opts):
    restart = min(opts.krylov_max, 60)
    outer = max(1, -(-opts.krylov_max // restart))
    solution, info = gmres(
        op,
        rhs,
        rtol=opts.krylov_tol,
        atol=0.0,
        restart=restart,
        maxiter=outer,
        M=precond,
    )
    return solution, info


# -- the bordered branch-point solve --------------------------------------------


def _bordered_jacobian(phys, drive, base, basis):
    """Matrix-free bordered Jacobian at (base, drive) and its border columns."""
    grid = base.grid
    lin = LinearizedN(phys, drive, base)
    col_gamma = jac_gamma(base)
    col_kappa = jac_kappa(base)

    def matvec(x):
        ds, (dg, dk) = _unpack_state(grid, x, n_extra=2)
        out = apply_P(phys, drive, ds) + lin.apply(ds) + dg * col_gamma + dk * col_kappa
        c_plus = inner_product(ds.eta, basis.phi_plus)
        c_minus = inner_product(ds.eta, basis.phi_minus)
        return _pack_residual(out, (c_plus, c_minus))

    n = 6 * grid.N1 * grid.N2 + 2
    return LinearOperator((n, n), matvec=matvec, dtype=np.float64), col_gamma, col_kappa


def _make_preconditioner(phys, drive_star, basis, col_gamma, col_kappa):
    """Approximate inverse of the bordered Jacobian.

    The kernel-complement pseudo-solve inverts the bulk; the two obstruction
    components of the right-hand side determine the parameter increments
    through a 2x2 solve, and the two constraint slots restore the kernel
    directions.
    """
    from .linear import apply_S

    grid = basis.grid
    gamma_star = drive_star.gamma

    def obstruction(res):
        s = apply_S(phys, gamma_star, res)
        return np.array(
            [inner_product(s, basis.phi_plus), inner_product(s, basis.phi_minus)]
        )

    G = np.column_stack([obstruction(col_gamma), obstruction(col_kappa)])

    def matvec(x):
        rr, (r_plus, r_minus) = _unpack_residual(grid, x, n_extra=2)
        dlam = np.linalg.solve(G, obstruction(rr))
        rr2 = rr - dlam[0] * col_gamma - dlam[1] * col_kappa
        z = solve_P(phys, drive_star, rr2, "pseudo_on_Z")
        out = z + r_plus * basis.V_plus + r_minus * basis.V_minus
        return _pack_state(out, dlam)

    n = 6 * grid.N1 * grid.N2 + 2
    return LinearOperator((n, n), matvec=matvec, dtype=np.float64)


def solve_branch_point(
    phys: PhysicalParams,
    drive_star: DriveParams,
    basis: KernelBasis,
    a: float,
    theta: float,
    opts: NewtonOptions | None = None,
    warm_start: tuple[State, DriveParams] | None = None,
    a_max: float = 0.2,
) -> BranchPoint:
    """Solve for the roll wave at amplitude a and kernel phase theta.

    The converged point satisfies the residual tolerance and pins the kernel
    projections of the free surface to (a cos theta, a sin theta).  The
    initial guess is the normalized kernel combination scaled by a unless a
    warm start (state, drive) is supplied.
    """
    opts = opts or NewtonOptions()
    if not classify(phys, drive_star).in_wave_region:
        raise DomainError("branch points require a terminus inside the wave region")
    if basis.drive != drive_star or basis.phys != phys:
        raise DomainError("kernel basis was built for different parameters")
    if abs(a) > a_max:
        raise DomainError(f"amplitude |{a}| exceeds the small-amplitude cap {a_max}")
    grid = basis.grid

    if a == 0.0:
        return BranchPoint(
            phys=phys,
            amplitude=0.0,
            theta=theta,
            drive_star=drive_star,
            drive=drive_star,
            state=State.zeros(grid),
            residual_norm=0.0,
            newton_iters=0,
            converged=True,
            residual_history=(0.0,),
        )

    target = (a * math.cos(theta), a * math.sin(theta))
    if warm_start is not None:
        state, drive = warm_start
    else:
        v_plus = basis.V_plus * (1.0 / basis.V_plus.norm())
        v_minus = basis.V_minus * (1.0 / basis.V_minus.norm())
        state = a * (math.cos(theta) * v_plus + math.sin(theta) * v_minus)
        drive = drive_star

    history = []
    converged = False
    res_norm = math.inf
    cons_norm = math.inf
    iters = 0
    for iteration in range(opts.max_iter + 1):
        res = residual(phys, drive, state)
        c_plus = inner_product(state.eta, basis.phi_plus) - target[0]
        c_minus = inner_product(state.eta, basis.phi_minus) - target[1]
        res_norm = res.norm()
        cons_norm = math.hypot(c_plus, c_minus)
        history.append(res_norm)
        if res_norm <= opts.tol_residual and cons_norm <= opts.tol_residual:
            converged = True
            iters = iteration
            break
        if iteration == opts.max_iter:
            iters = iteration
            break
        op, col_gamma, col_kappa = _bordered_jacobian(phys, drive, state, basis)
        precond = _make_preconditioner(phys, drive_star, basis, col_gamma, col_kappa)
        rhs = -_pack_residual(res, (c_plus, c_minus))
        step, _info = _run_gmres(op, rhs, precond, opts)
        ds, (dg, dk) = _unpack_state(grid, step, n_extra=2)
        fraction = opts.damping if iteration == 0 else 1.0
        state = state + fraction * ds
        drive = DriveParams(drive.gamma + fraction * dg, drive.kappa + fraction * dk)

    point = BranchPoint(
        phys=phys,
        amplitude=a,
        theta=theta,
        drive_star=drive_star,
        drive=drive,
        state=state,
        residual_norm=res_norm,
        newton_iters=iters,
        converged=converged,
        residual_history=tuple(history),
        constraint_violation=cons_norm,
    )
    if not converged:
        error = NoConvergence(
            f"Newton did not reach {opts.tol_residual} within {opts.max_iter} iterations "
            f"(final residual {res_norm:.3e})",
            final_residual=res_norm,
            iterations=iters,
        )
        error.branch_point = point
        raise error
    return point


def continue_branch(
    phys: PhysicalParams,
    drive_star: DriveParams,
    basis: KernelBasis,
    theta: float,
    a_list,
    opts: NewtonOptions | None = None,
) -> list[BranchPoint]:
    """Solve an amplitude sweep, warm-starting each point from the previous.

    Amplitudes must be sorted ascending in magnitude.  A failed point is
    recorded unconverged and terminates the sweep; the partial list is
    returned rather than raising.
    """
    a_values = list(a_list)
    mags = [abs(a) for a in a_values]
    if mags != sorted(mags):
        raise DomainError("amplitude list must be sorted ascending in magnitude")
    points: list[BranchPoint] = []
    previous: BranchPoint | None = None
    for a in a_values:
        warm = None
        if previous is not None and previous.converged and previous.amplitude != 0.0:
            scale = a / previous.amplitude
            warm = (previous.state * scale, previous.drive)
        try:
            point = solve_branch_point(
                phys, drive_star, basis, a, theta, opts=opts, warm_start=warm
            )
        except NoConvergence as err:
            points.append(err.branch_point)
            break
        points.append(point)
        previous = point
    return points


# -- nonexistence probes ---------------------------------------------------------


def _fixed_drive_newton(phys, drive, state, opts, resid_tol):
    """Newton at fixed drive on the relaxed (untagged) space; returns the
    final state, residual norm and iteration count."""
    grid = state.grid
    n = 6 * grid.N1 * grid.N2

    def precond_matvec(x):
        rr = _unpack_residual(grid, x, tagged=False)
        return _pack_state(solve_P(phys, drive, rr, "full"))

    precond = LinearOperator((n, n), matvec=precond_matvec, dtype=np.float64)
    res = residual(phys, drive, state)
    res_norm = res.norm()
    iters = 0
    for iteration in range(opts.max_iter):
        if res_norm <= resid_tol:
            break
        lin = LinearizedN(phys, drive, state)

        def matvec(x, lin=lin):
            ds = _unpack_state(grid, x, tagged=False)
            return _pack_residual(apply_P(phys, drive, ds) + lin.apply(ds))

        op = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
        step, _info = _run_gmres(op, -_pack_residual(res), precond, opts)
        state = state + _unpack_state(grid, step, tagged=False)
        res = residual(phys, drive, state)
        res_norm = res.norm()
        iters = iteration + 1
    return state, res_norm, iters


def nonexistence_probe(
    phys: PhysicalParams,
    drive: DriveParams,
    grid: TorusGrid,
    n_trials: int = 20,
    init_norm: float = 1e-3,
    opts: NewtonOptions | None = None,
    seed: int = 12345,
) -> ProbeReport:
    """Verify local uniqueness of the trivial state outside the wave region.

    Runs Newton at fixed (gamma, kappa) from seeded random states of the
    given norm, without parity restrictions, and checks that every trial
    relaxes to the zero state (final norm <= 1e-12).  Raises ProbeFailure if
    any trial settles on a nonzero solution or fails to converge, since that
    would contradict the local-uniqueness claim being probed.
    """
    opts = opts or NewtonOptions()
    if classify(phys, drive).in_wave_region:
        raise DomainError("nonexistence probes require drive outside the wave region")
    resid_tol = min(opts.tol_residual, 1e-13)
    seeds = tuple(seed + i for i in range(n_trials))
    final_norms = []
    final_residuals = []
    iters_list = []
    for trial_seed in seeds:
        rng = np.random.default_rng(trial_seed)
        state = State(
            VectorField(random_field(grid, rng), random_field(grid, rng)),
            random_field(grid, rng, zero_mean=True),
        )
        norm0 = state.norm()
        state = state * (init_norm / norm0)
        state, res_norm, iters = _fixed_drive_newton(phys, drive, state, opts, resid_tol)
        final_norm = state.norm()
        final_norms.append(final_norm)
        final_residuals.append(res_norm)
        iters_list.append(iters)
        if final_norm > 1e-12:
            raise ProbeFailure(
                f"probe seed {trial_seed} at ({drive.gamma}, {drive.kappa}) ended at "
                f"state norm {final_norm:.3e} (residual {res_norm:.3e}); "
                "expected relaxation to the zero state"
            )
    return ProbeReport(
        drive=drive,
        grid=grid,
        n_trials=n_trials,
        init_norm=init_norm,
        seed=seed,
        seeds=seeds,
        final_state_norms=tuple(final_norms),
        final_residuals=tuple(final_residuals),
        newton_iters=tuple(iters_list),
        all_trivial=True,
    )


# -- reflection -------------------------------------------------------------------


def reflect_state(state: State) -> State:
    """Push a state through (x1, x2) -> (-x1, x2), negating the first velocity."""
    return State(
        VectorField(reflect_x1(state.u.u1, negate=True), reflect_x1(state.u.u2)),
        reflect_x1(state.eta),
    )


def reflect_solution(bp: BranchPoint) -> BranchPoint:
    """The mirror branch point at negated drive parameters.

    The reflected state solves the system at (-gamma, -kappa) with the same
    residual norm; kernel projections transform as (a cos, a sin) ->
    (a cos, -a sin), i.e. theta -> -theta.
    """
    state = reflect_state(bp.state)
    drive = bp.drive.negated()
    res_norm = residual(bp.phys, drive, state).norm()
    return BranchPoint(
        phys=bp.phys,
        amplitude=bp.amplitude,
        theta=-bp.theta,
        drive_star=bp.drive_star.negated(),
        drive=drive,
        state=state,
        residual_norm=res_norm,
        newton_iters=bp.newton_iters,
        converged=bp.converged,
        residual_history=bp.residual_history,
        constraint_violation=bp.constraint_violation,
    )


def default_basis(phys: PhysicalParams, drive_star: DriveParams, n1: int = 64, n2: int = 64):
    """Kernel basis on the grid whose periods match the terminus drive."""
    from .params import period_lengths

    L1, L2 = period_lengths(phys, drive_star)
    return kernel_basis(phys, drive_star, TorusGrid(L1, L2, n1, n2))
