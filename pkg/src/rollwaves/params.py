"""Parameter geometry for the wave region.

Everything here is closed form.  With the inverse Reynolds number mu and the
inverse Bond number sigma fixed, the pair (gamma, kappa) of relative wave
speed and incline steepness either admits small roll waves or it does not.
The admissible set is

    {gamma, kappa > 1  and  0 < kappa - gamma <= (4 mu / sigma) gamma (gamma^2 - 1)}

together with its mirror image under (gamma, kappa) -> (-gamma, -kappa).
Points where the upper bound is attained ("border") carry one-dimensional
wave profiles; strict inequality ("interior") gives properly two-dimensional
ones.  The helper quantities rho and chi fix the radius and tilt of the
resonant frequency circle, and period_lengths places those frequencies
exactly on the frequency lattice of the torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError

# Relative tolerance for deciding that (gamma, kappa) sits exactly on the
# region boundary.  Floating-point inputs cannot hit a measure-zero curve,
# so equality is a band; callers needing exact border points should build
# kappa from gamma via `border_kappa`.
BORDER_REL_TOL = 1e-10


@dataclass(frozen=True)
class PhysicalParams:
    """Fixed fluid parameters: inverse Reynolds number mu, inverse Bond number sigma."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise DomainError(f"mu must be a positive real, got {self.mu}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be a positive real, got {self.sigma}")


@dataclass(frozen=True)
class DriveParams:
    """The two bifurcation parameters: relative wave speed gamma and tilt kappa."""

    gamma: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.kappa)):
            raise DomainError("gamma and kappa must be finite")

    @property
    def frame_speed(self) -> float:
        """Speed of the traveling frame, gamma + kappa."""
        return self.gamma + self.kappa

    def negated(self) -> "DriveParams":
        return DriveParams(-self.gamma, -self.kappa)


class Region(Enum):
    """Where (gamma, kappa) sits relative to the roll-wave region."""

    INTERIOR = "InteriorE"
    BORDER = "BorderE"
    INTERIOR_NEG = "InteriorNegE"
    BORDER_NEG = "BorderNegE"
    OUTSIDE = "Outside"

    @property
    def in_wave_region(self) -> bool:
        return self is not Region.OUTSIDE

    @property
    def is_border(self) -> bool:
        return self in (Region.BORDER, Region.BORDER_NEG)

    @property
    def is_negative(self) -> bool:
        return self in (Region.INTERIOR_NEG, Region.BORDER_NEG)


def border_gap(phys: PhysicalParams, gamma: float) -> float:
    """Upper bound (4 mu / sigma) gamma (gamma^2 - 1) on kappa - gamma."""
    return (4.0 * phys.mu / phys.sigma) * gamma * (gamma * gamma - 1.0)


def border_kappa(phys: PhysicalParams, gamma: float) -> float:
    """kappa placing (gamma, kappa) exactly on the region border."""
    if gamma <= 1.0:
        raise DomainError(f"border requires gamma > 1, got {gamma}")
    return gamma + border_gap(phys, gamma)


def _classify_positive(phys: PhysicalParams, gamma: float, kappa: float):
    """Classify assuming the positive branch; returns None if not a member."""
    if gamma <= 1.0:
        return None
    diff = kappa - gamma
    if diff <= 0.0:
        return None
    bound = border_gap(phys, gamma)
    scale = max(abs(diff), abs(bound))
    if abs(diff - bound) <= BORDER_REL_TOL * scale:
        return Region.BORDER
    if diff < bound:
        return Region.INTERIOR
    return None


def classify(phys: PhysicalParams, drive: DriveParams) -> Region:
    """Classify (gamma, kappa) as interior/border of the wave region, its mirror, or outside."""
    pos = _classify_positive(phys, drive.gamma, drive.kappa)
    if pos is not None:
        return pos
    neg = _classify_positive(phys, -drive.gamma, -drive.kappa)
    if neg is Region.INTERIOR:
        return Region.INTERIOR_NEG
    if neg is Region.BORDER:
        return Region.BORDER_NEG
    return Region.OUTSIDE


def _require_wave_region(phys: PhysicalParams, drive: DriveParams) -> Region:
    region = classify(phys, drive)
    if not region.in_wave_region:
        raise DomainError(
            f"(gamma, kappa) = ({drive.gamma}, {drive.kappa}) is outside the wave region"
        )
    return region


def gamma_min(phys: PhysicalParams, kappa: float) -> float:
    """Minimal admissible wave speed at tilt kappa.

    The unique gamma in (1, kappa) solving
        gamma^2 = 1 + (sigma / 4 mu) (kappa / gamma - 1),
    found by bisection (the bracket (1, kappa) is guaranteed) and polished
    with Newton steps to absolute tolerance 1e-12.
    """
    if not (kappa > 1.0):
        raise DomainError(f"gamma_min requires kappa > 1, got {kappa}")
    c = phys.sigma / (4.0 * phys.mu)

    def f(g):
        return g * g - 1.0 - c * (kappa / g - 1.0)

    lo, hi = 1.0, kappa
    # f(1+) = -c (kappa - 1) < 0 and f(kappa) = kappa^2 - 1 > 0.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * kappa:
            break
    g = 0.5 * (lo + hi)
    for _ in range(8):
        fg = f(g)
        dfg = 2.0 * g + c * kappa / (g * g)
        step = fg / dfg
        g -= step
        if abs(step) <= 1e-14 * max(1.0, abs(g)):
            break
    return g


def rho(phys: PhysicalParams, drive: DriveParams) -> float:
    """Radius of the resonant frequency circle, sqrt((kappa/gamma - 1) / (16 pi^2 mu)).

    Defined on the wave region and its mirror (absolute values are taken).
    """
    _require_wave_region(phys, drive)
    g, k = abs(drive.gamma), abs(drive.kappa)
    radicand = (k / g - 1.0) / (16.0 * math.pi ** 2 * phys.mu)
    return math.sqrt(radicand)


def chi(phys: PhysicalParams, drive: DriveParams) -> float:
    """Cosine of the resonant frequency tilt, in (0, 1]; exactly 1 on the border."""
    region = _require_wave_region(phys, drive)
    if region.is_border:
        return 1.0
    g, k = abs(drive.gamma), abs(drive.kappa)
    value = math.sqrt(1.0 + (phys.sigma / (4.0 * phys.mu)) * (k / g - 1.0)) / g
    if value >= 1.0:
        # Interior classification guarantees value < 1 analytically; anything
        # else means the point straddles the border beyond the tolerance band.
        raise DomainError(
            f"chi = {value} >= 1 at ({drive.gamma}, {drive.kappa}); point is not interior"
        )
    return value


def period_lengths(phys: PhysicalParams, drive: DriveParams) -> tuple[float, float]:
    """Torus side lengths placing the resonant frequencies exactly on the lattice."""
    region = _require_wave_region(phys, drive)
    r = rho(phys, drive)
    if region.is_border:
        return (1.0 / r, 1.0 / r)
    x = chi(phys, drive)
    return (1.0 / (r * x), 1.0 / (r * math.sqrt(1.0 - x * x)))


def kernel_frequencies(phys: PhysicalParams, drive: DriveParams) -> tuple[tuple[float, float], ...]:
    """Frequencies at which the linearization loses invertibility.

    Two points (+-rho, 0) on the border, four points (+-rho chi, +-rho
    sqrt(1 - chi^2)) in the interior; all lie on the circle of radius rho and
    exactly on the lattice Z/L1 x Z/L2 for L = period_lengths(...).
    """
    region = _require_wave_region(phys, drive)
    r = rho(phys, drive)
    if region.is_border:
        return ((r, 0.0), (-r, 0.0))
    x = chi(phys, drive)
    xi1 = r * x
    xi2 = r * math.sqrt(1.0 - x * x)
    return ((xi1, xi2), (xi1, -xi2), (-xi1, xi2), (-xi1, -xi2))


def region_boundary_scan(
    phys: PhysicalParams, kappa_lo: float, kappa_hi: float, n: int
) -> list[tuple[float, float, float]]:
    """Sample the lower and upper wave-speed bounds over a tilt range.

    Returns n rows (kappa, gamma_min(kappa), kappa); the last entry is the
    exclusive upper bound gamma < kappa.
    """
    if not (1.0 < kappa_lo < kappa_hi):
        raise DomainError(
            f"need 1 < kappa_lo < kappa_hi, got ({kappa_lo}, {kappa_hi})"
        )
    if n < 2:
        raise DomainError(f"need at least 2 samples, got {n}")
    rows = []
    for i in range(n):
        k = kappa_lo + (kappa_hi - kappa_lo) * i / (n - 1)
        rows.append((k, gamma_min(phys, k), k))
    return rows
