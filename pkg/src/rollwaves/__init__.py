"""Pseudospectral construction and verification of small-amplitude,
two-dimensional gravity-capillary viscous roll waves on periodic domains."""

from .errors import (
    ConfigError,
    DomainError,
    NoConvergence,
    ProbeFailure,
    ShapeError,
    SingularModeError,
)
from .params import (
    DriveParams,
    PhysicalParams,
    Region,
    border_kappa,
    classify,
    chi,
    gamma_min,
    kernel_frequencies,
    period_lengths,
    region_boundary_scan,
    rho,
)
from .spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    analyze,
    apply_multiplier,
    dealiased_product,
    dealiased_triple_product,
    helmholtz_inverse,
    inner_product,
    inv_laplacian,
    leray,
    parity_project,
    riesz,
    synthesize,
    zero_mean_project,
)
from .linear import (
    KernelBasis,
    Residual,
    State,
    apply_P,
    apply_Ps,
    apply_Pt,
    apply_Q,
    apply_S,
    count_rank_deficient_modes,
    kernel_basis,
    lift_R,
    mode_matrix,
    project_kernel,
    project_Z,
    q_symbol,
    solve_P,
)
from .nonlinear import (
    ResidualMapContext,
    apply_DJ,
    apply_DN,
    apply_N,
    jac_gamma,
    jac_kappa,
    residual,
)
from .solver import (
    BranchPoint,
    NewtonOptions,
    ProbeReport,
    continue_branch,
    default_basis,
    nonexistence_probe,
    reflect_solution,
    solve_branch_point,
)

__version__ = "0.1.0"
