"""Physical regime: dispersion relation, branch selection, near-critical
wavenumber construction, and the five dissipation scaling laws.

All computations are done in slope coordinates (x along the slope, y normal
to it) with unit buoyancy frequency.  The wave frequency of a plane wave
with wavenumber (k, m) is

    omega^(+/-)(k, m) = +/- (k cos(gamma) - m sin(gamma)) / sqrt(k^2 + m^2),

where gamma is the slope angle.  Criticality is measured by
zeta = omega^2 - sin(gamma)^2; the constructions below pin zeta = eps^2
exactly by tuning the packet-center wavenumber.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RegimeError

#: Largest admissible packet-width parameter.
EPS_MAX = 0.5

#: Reject slope angles with |cos 2*gamma| below this (too close to pi/4,
#: where the order-one root of the characteristic polynomial degenerates).
MIN_ABS_COS_2GAMMA = 0.05


class Case(enum.IntEnum):
    """Dissipation regimes, distinguished by which coefficient carries the
    sixth-power law and by the exponent range of the other one."""

    CASE1 = 1  # nu = nu0 eps^6,     kappa = kappa0 eps^beta,  beta < 6
    CASE2 = 2  # nu = nu0 eps^6,     kappa = kappa0 eps^beta,  beta > 6
    CASE3 = 3  # nu = nu0 eps^beta,  kappa = kappa0 eps^6,     beta < 6
    CASE4 = 4  # nu = nu0 eps^beta,  kappa = kappa0 eps^6,     beta > 6
    CASE5 = 5  # nu = nu0 eps^beta,  kappa = kappa0 eps^beta,  beta > 6


#: Cases whose free exponent must satisfy beta < 6.
_CASES_BETA_BELOW_6 = (Case.CASE1, Case.CASE3)
#: Cases whose free exponent must satisfy beta > 6.
_CASES_BETA_ABOVE_6 = (Case.CASE2, Case.CASE4, Case.CASE5)


@dataclass(frozen=True)
class RegimeParams:
    """Slope angle, regime case, and dissipation scaling constants.

    gamma   : slope angle in radians, 0 < gamma < pi/2 and away from pi/4
    case_id : one of the five scaling regimes
    beta    : free scaling exponent (beta < 6 for cases 1/3, beta > 6 for 2/4/5)
    nu0     : viscosity prefactor, > 0
    kappa0  : diffusivity prefactor, > 0
    """

    gamma: float
    case_id: Case
    beta: float
    nu0: float = 1.0
    kappa0: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma < math.pi / 2:
            raise RegimeError(f"slope angle must lie in (0, pi/2), got {self.gamma}")
        if abs(math.cos(2 * self.gamma)) < MIN_ABS_COS_2GAMMA:
            raise RegimeError(
                "slope angle too close to pi/4: |cos 2*gamma| = "
                f"{abs(math.cos(2 * self.gamma)):.3g} < {MIN_ABS_COS_2GAMMA}"
            )
        case = Case(self.case_id)
        object.__setattr__(self, "case_id", case)
        if self.beta <= 0:
            raise RegimeError(f"beta must be positive, got {self.beta}")
        if case in _CASES_BETA_BELOW_6 and not self.beta < 6:
            raise RegimeError(f"case {case.value} requires beta < 6, got {self.beta}")
        if case in _CASES_BETA_ABOVE_6 and not self.beta > 6:
            raise RegimeError(f"case {case.value} requires beta > 6, got {self.beta}")
        if self.nu0 <= 0 or self.kappa0 <= 0:
            raise RegimeError("nu0 and kappa0 must be positive")


@dataclass(frozen=True)
class CriticalSetup:
    """Near-critical packet center produced by :func:`critical_wavenumber`.

    k0, m0 : packet-center wavenumber; zeta = omega^2 - sin(gamma)^2 = eps^2
    eps    : width/criticality parameter
    omega  : frequency on the downward-propagating branch at (k0, m0)
    zeta   : criticality parameter (equals eps^2 by construction)
    branch : +1 or -1, the sign s such that omega = omega^s(k, m) pointwise
    gamma  : slope angle, copied from the regime for convenience
    """

    k0: float
    m0: float
    eps: float
    omega: float
    zeta: float
    branch: int
    gamma: float


def _check_wavenumber(k, m):
    if np.any((np.asarray(k) == 0) & (np.asarray(m) == 0)):
        raise DomainError("wavenumber (k, m) = (0, 0) is not admissible")


def dispersion(k, m, gamma, branch=+1):
    """Frequency omega^branch(k, m) of a plane internal wave.

    Accepts scalars or arrays; omega^2 <= 1 always holds.
    """
    _check_wavenumber(k, m)
    if branch not in (+1, -1):
        raise DomainError(f"branch must be +1 or -1, got {branch}")
    k = np.asarray(k, float)
    m = np.asarray(m, float)
    om = branch * (k * np.cos(gamma) - m * np.sin(gamma)) / np.hypot(k, m)
    return om if om.ndim else float(om)

def group_velocity(k, m, gamma, branch=+1):
    """Gradient of omega^branch with respect to (k, m).

    Only the sign of the second component is used downstream (branch
    selection: the incident packet must propagate toward the boundary).
    """
    _check_wavenumber(k, m)
    if branch not in (+1, -1):
        raise DomainError(f"branch must be +1 or -1, got {branch}")
    k = np.asarray(k, float)
    m = np.asarray(m, float)
    r3 = (k * k + m * m) ** 1.5
    sg, cg = math.sin(gamma), math.cos(gamma)
    dk = branch * m * (m * cg + k * sg) / r3
    dm = -branch * k * (k * sg + m * cg) / r3
    if dk.ndim:
        return np.stack([dk, dm])
    return float(dk), float(dm)


def critical_wavenumber(params: RegimeParams, eps: float, eps_max: float = EPS_MAX,
                        k0: float = 1.0) -> CriticalSetup:
    """Construct the packet center (k0, m0) with zeta = eps^2 exactly.

    With mh = m0/k0, mh solves (cos g - mh sin g)^2 / (1 + mh^2) = sin(g)^2
    + eps^2 (the dispersion relation is 0-homogeneous), taking the quadratic
    root that continues the zero-criticality locus mh = cot(2g) as eps -> 0.
    The frequency branch is chosen so the packet propagates downwards
    (d omega / dm < 0 at the center).  k0 defaults to 1 by convention.
    """
    if not 0 < eps < eps_max:
        raise RegimeError(f"eps must lie in (0, {eps_max}), got {eps}")
    if k0 <= 0:
        raise RegimeError(f"k0 must be positive, got {k0}")
    g = params.gamma
    s2, c2 = math.sin(2 * g), math.cos(2 * g)
    target = math.sin(g) ** 2 + eps**2
    if target >= 1.0:
        raise RegimeError(f"eps = {eps} pushes omega^2 = {target} past 1 for gamma = {g}")
    # eps^2 mh^2 + sin(2g) mh - (cos(2g) - eps^2) = 0; rationalized root near cot(2g)
    disc = s2 * s2 + 4 * eps**2 * (c2 - eps**2)
    if disc < 0:
        raise RegimeError(f"no real critical wavenumber for gamma = {g}, eps = {eps}")
    m0 = k0 * 2 * (c2 - eps**2) / (s2 + math.sqrt(disc))
    # pick the branch whose group velocity points toward the boundary
    branch = +1 if group_velocity(k0, m0, g, +1)[1] < 0 else -1
    omega = dispersion(k0, m0, g, branch)
    zeta = omega**2 - math.sin(g) ** 2
    return CriticalSetup(k0=k0, m0=m0, eps=eps, omega=omega, zeta=zeta, branch=branch, gamma=g)


def viscosity_diffusivity(params: RegimeParams, eps: float):
    """Dissipation pair (nu, kappa) for the regime at packet width eps."""
    if eps <= 0:
        raise RegimeError(f"eps must be positive, got {eps}")
    b = params.beta
    case = params.case_id
    if case in (Case.CASE1, Case.CASE2):
        nu, kappa = params.nu0 * eps**6, params.kappa0 * eps**b
    elif case in (Case.CASE3, Case.CASE4):
        nu, kappa = params.nu0 * eps**b, params.kappa0 * eps**6
    else:
        nu, kappa = params.nu0 * eps**b, params.kappa0 * eps**b
    return nu, kappa


def dissipation_exponents(params: RegimeParams):
    """The pure powers (q_nu, q_kappa) with nu ~ eps^q_nu, kappa ~ eps^q_kappa."""
    b = params.beta
    case = params.case_id
    if case in (Case.CASE1, Case.CASE2):
        return 6.0, float(b)
    if case in (Case.CASE3, Case.CASE4):
        return float(b), 6.0
    return float(b), float(b)
