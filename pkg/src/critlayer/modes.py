"""Boundary-layer eigenvectors, pressure, and the 3x3 amplitude system that
matches the layer sum to the incident trace at the wall.

For an exact root lam of the characteristic polynomial, the mode shape is

    U = 1,   W = ik / lam,
    B = (sin g + ik cos g / lam) / (i*omega + kappa*(lam^2 - k^2)),
    P = (1/(ik)) * [i*omega + nu*(lam^2 - k^2) + sin g * B].

The wall conditions u = w = d_y b = 0 couple the three decaying modes
(labels bl2, bl3, bl5) through

    M a = (-u_inc, -w_inc, -i m b_inc)   at each spectral node,

with rows (U_j), (W_j), (-lam_j B_j).  In the equal-dissipation regime with
beta >= 8 the slow bl2 layer decays too weakly to stay square integrable;
it is then dropped and only (u, w) are lifted through a 2x2 subsystem,
leaving a reported d_y b mismatch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NearSingularError, NumericalError, SingularModeError
from .regime import Case, CriticalSetup, RegimeParams, viscosity_diffusivity
from .spectrum import (
    RootFamily,
    assign_roots,
    charpoly_coeffs,
    find_roots,
    predicted_root_table,
)

#: Wall-row residual bound for the amplitude solve, relative to the row scale
#: sum_j |M_ij a_j| + |rhs_i| (the natural backward-stable normalization).
AMPLITUDE_RESIDUAL_RTOL = 1e-12

_CD = np.clongdouble  # extended precision for the cancellation-heavy rows


@dataclass(frozen=True)
class BoundaryLayerMode:
    """A single decaying layer: root, eigenvector, pressure, amplitude."""

    lam: complex
    U: complex
    W: complex
    B: complex
    P: complex
    amplitude: complex
    family: RootFamily

    def __post_init__(self):
        if self.lam.real <= 0:
            raise DomainError("a boundary-layer mode requires Re(lam) > 0")


def eigenvector(k, lam, omega, kappa, gamma):
    """Mode shape (U, W, B) for decay rate lam; broadcasts over arrays.

    Raises SingularModeError when the B denominator i*omega + kappa*(lam^2-k^2)
    vanishes: that happens exactly when lam solves the fast-layer reduced
    equation instead of the full polynomial, so use exact (or refined) roots.
    """
    k = np.asarray(k, float)
    lam = np.asarray(lam, complex)
    if np.any(lam == 0):
        raise DomainError("lam = 0 is not a mode")
    sg, cg = math.sin(gamma), math.cos(gamma)
    den = 1j * np.asarray(omega, float) - kappa * (k**2 - lam**2)
    if np.any(den == 0):
        raise SingularModeError("buoyancy denominator vanished; lam is not an exact root")
    U = np.ones(np.broadcast(k, lam).shape, complex)
    W = 1j * k / lam
    B = (sg + 1j * k * cg / lam) / den
    return U, W, B


def pressure(k, lam, omega, nu, kappa, gamma):
    """Pressure component of the mode; broadcasts over arrays."""
    k = np.asarray(k, float)
    lam = np.asarray(lam, complex)
    if np.any(k == 0):
        raise DomainError("k = 0 carries no pressure mode")
    sg, cg = math.sin(gamma), math.cos(gamma)
    den = 1j * np.asarray(omega, float) + kappa * (lam**2 - k**2)
    if np.any(den == 0):
        raise SingularModeError("buoyancy denominator vanished; lam is not an exact root")
    return (1.0 / (1j * k)) * (
        1j * np.asarray(omega, float) + nu * (lam**2 - k**2) + sg * (sg + 1j * k * cg / lam) / den
    )


def symbol_matrix(k, lam, omega, nu, kappa, gamma):
    """The 4x4 symbol A(omega, kappa, nu, k, lam) annihilating (U, W, B, P).

    Rows: x-momentum, y-momentum, buoyancy, incompressibility.
    """
    sg, cg = math.sin(gamma), math.cos(gamma)
    visc = -1j * omega - nu * (lam**2 - k**2)
    diff = -1j * omega - kappa * (lam**2 - k**2)
    return np.array(
        [
            [visc, 0.0, -sg, 1j * k],
            [0.0, visc, -cg, -lam],
            [sg, cg, diff, 0.0],
            [1j * k, -lam, 0.0, 0.0],
        ],
        dtype=complex,
    )


def incident_eigenvector(k, m, omega, gamma):
    """Fourier coefficients (u, w, b) of a free incident plane wave."""
    m = np.asarray(m, float)
    if np.any(m == 0):
        raise DomainError("m = 0 is outside the packet support")
    k = np.asarray(k, float)
    omega = np.asarray(omega, float)
    sg, cg = math.sin(gamma), math.cos(gamma)
    u = np.ones(np.broadcast(k, m).shape, complex)
    w = -k / m + 0j
    b = 1j * (k * cg - m * sg) / (m * omega)
    return u, w, b


def incident_pressure(k, m, omega, gamma):
    """Pressure coefficient recovered from the x-momentum balance
    -i*omega*u - sin(g)*b + i*k*p = 0 (inviscid), i.e. p = (i*omega*u + sin(g)*b)/(ik)."""
    u, _, b = incident_eigenvector(k, m, omega, gamma)
    sg = math.sin(gamma)
    return (1j * np.asarray(omega, float) * u + sg * b) / (1j * np.asarray(k, float))


def incident_trace(setup: CriticalSetup, k, m, omega=None):
    """Negated wall trace (fu, fw, fb) = (-u_inc, -w_inc, -i m b_inc) per mode."""
    if omega is None:
        omega = setup.omega
    u, w, b = incident_eigenvector(k, m, omega, setup.gamma)
    return -u, -w, -1j * np.asarray(m, float) * b


def amplitude_matrix(k, lams, Bs):
    """Assemble the 3x3 wall-matching matrix for decay rates (l2, l3, l5)."""
    l2, l3, l5 = lams
    B2, B3, B5 = Bs
    k = np.asarray(k, float)
    one = np.ones(np.broadcast(k, np.asarray(l2)).shape, complex)
    return np.stack(
        [
            np.stack([one, one, one], axis=-1),
            np.stack([1j * k / l2, 1j * k / l3, 1j * k / l5], axis=-1),
            np.stack([-l2 * B2, -l3 * B3, -l5 * B5], axis=-1),
        ],
        axis=-2,
    )


def det_closed(k, lams, Bs):
    """Closed-form determinant of the wall-matching matrix:

    det M = ik ( B2 l2/l3 - B3 l3/l2 + B3 l3/l5 - B2 l2/l5 + B5 l5/l2 - B5 l5/l3 ).
    """
    l2, l3, l5 = lams
    B2, B3, B5 = Bs
    return 1j * np.asarray(k, float) * (
        B2 * l2 / l3 - B3 * l3 / l2 + B3 * l3 / l5 - B2 * l2 / l5 + B5 * l5 / l2 - B5 * l5 / l3
    )


def _adjugate_apply(k, lams, Bs, rhs):
    """Apply the closed-form adjugate of M to rhs = (fu, fw, fb).

    Derived by cofactor expansion and verified against a generic linear
    solve; the third row is (+ik(B2 l2/l3 - B3 l3/l2), B3 l3 - B2 l2,
    ik(1/l3 - 1/l2)).
    """
    l2, l3, l5 = lams
    B2, B3, B5 = Bs
    fu, fw, fb = rhs
    ik = 1j * np.asarray(k, float)
    n2 = (-ik * B5 * l5 / l3 + ik * B3 * l3 / l5) * fu + (B5 * l5 - B3 * l3) * fw + ik * (1 / l5 - 1 / l3) * fb
    n3 = (ik * B5 * l5 / l2 - ik * B2 * l2 / l5) * fu + (B2 * l2 - B5 * l5) * fw + ik * (1 / l2 - 1 / l5) * fb
    n5 = (ik * B2 * l2 / l3 - ik * B3 * l3 / l2) * fu + (B3 * l3 - B2 * l2) * fw + ik * (1 / l3 - 1 / l2) * fb
    return n2, n3, n5


def solve_amplitudes(k, lams, Bs, rhs, eps=None, check=True):
    """Amplitudes (a2, a3, a5) solving M a = rhs, via the closed-form inverse.

    Arithmetic runs in extended precision: the d_y b row mixes terms many
    orders above its O(1) result, and plain double precision would pollute
    the wall-trace cancellation checked downstream.  The residual contract is
    |...(M a - rhs)_i| <= AMPLITUDE_RESIDUAL_RTOL * (sum_j |M_ij a_j| + |rhs_i|).
    """
    lams = tuple(np.asarray(l, _CD) for l in lams)
    Bs = tuple(np.asarray(B, _CD) for B in Bs)
    rhs = tuple(np.asarray(r, _CD) for r in rhs)
    det = det_closed(k, lams, Bs)
    scale = np.abs(np.asarray(lams[2])) * np.maximum.reduce([np.abs(np.asarray(B)) for B in Bs])
    if np.any(np.abs(det) <= 1e-12 * np.maximum(scale, 1.0)):
        raise NearSingularError(
            "wall-matching system is numerically singular",
            det=complex(np.asarray(det).ravel()[0]),
            eps=eps,
        )
    n2, n3, n5 = _adjugate_apply(k, lams, Bs, rhs)
    a = (n2 / det, n3 / det, n5 / det)
    if check:
        resid = amplitude_residual(k, lams, Bs, rhs, a)
        worst = float(np.max(resid))
        if worst > AMPLITUDE_RESIDUAL_RTOL:
            raise NumericalError(
                f"amplitude solve residual {worst:.3g} exceeds {AMPLITUDE_RESIDUAL_RTOL}",
                residual=worst,
            )
    return tuple(np.asarray(x, complex) for x in a), np.asarray(det, complex)


def amplitude_residual(k, lams, Bs, rhs, a):
    """Row-relative residual of M a = rhs (computed in extended precision)."""
    l2, l3, l5 = (np.asarray(l, _CD) for l in lams)
    B2, B3, B5 = (np.asarray(B, _CD) for B in Bs)
    a2, a3, a5 = (np.asarray(x, _CD) for x in a)
    fu, fw, fb = (np.asarray(r, _CD) for r in rhs)
    ik = 1j * np.asarray(k, float).astype(_CD)
    rows = (
        (a2 + a3 + a5, fu, np.abs(a2) + np.abs(a3) + np.abs(a5)),
        (ik * (a2 / l2 + a3 / l3 + a5 / l5), fw,
         np.abs(ik) * (np.abs(a2 / l2) + np.abs(a3 / l3) + np.abs(a5 / l5))),
        (-(l2 * B2 * a2 + l3 * B3 * a3 + l5 * B5 * a5), fb,
         np.abs(l2 * B2 * a2) + np.abs(l3 * B3 * a3) + np.abs(l5 * B5 * a5)),
    )
    out = []
    for lhs, r, sc in rows:
        out.append(np.abs(lhs - r) / (sc + np.abs(r) + np.finfo(float).tiny))
    return np.max(np.stack(out), axis=0).astype(float)


def wall_row_residuals(k, lams, Bs, rhs, a):
    """Signed per-node row mismatches (M a - rhs) in extended precision.

    These are the exact spectral densities of the wall residuals of the
    assembled solution; integrating them against the envelope gives the
    boundary residual without re-incurring the catastrophic cancellation.
    """
    l2, l3, l5 = (np.asarray(l, _CD) for l in lams)
    B2, B3, B5 = (np.asarray(B, _CD) for B in Bs)
    a2, a3, a5 = (np.asarray(x, _CD) for x in a)
    fu, fw, fb = (np.asarray(r, _CD) for r in rhs)
    ik = 1j * np.asarray(k, float).astype(_CD)
    ru = a2 + a3 + a5 - fu
    rw = ik * (a2 / l2 + a3 / l3 + a5 / l5) - fw
    rb = -(l2 * B2 * a2 + l3 * B3 * a3 + l5 * B5 * a5) - fb
    return np.asarray(ru, complex), np.asarray(rw, complex), np.asarray(rb, complex)


def solve_uw_pair(k, l3, l5, fu, fw):
    """2x2 subsystem lifting only (u, w) with the two fast layers.

    Used when the slow layer is degenerate (equal dissipation, beta >= 8).
    """
    l3 = np.asarray(l3, _CD)
    l5 = np.asarray(l5, _CD)
    fu = np.asarray(fu, _CD)
    fw = np.asarray(fw, _CD)
    ik = 1j * np.asarray(k, float).astype(_CD)
    W3, W5 = ik / l3, ik / l5
    det = W5 - W3
    a3 = (W5 * fu - fw) / det
    a5 = (fw - W3 * fu) / det
    return np.asarray(a3, complex), np.asarray(a5, complex)


# --------------------------------------------------------------------------
# per-node pipeline: roots -> labels -> modes -> amplitudes


_SLOT_INDEX = {
    RootFamily.INCIDENT: 0,
    RootFamily.BL2: 1,
    RootFamily.DEGENERATE: 1,
    RootFamily.BL3: 2,
    RootFamily.BL4: 3,
    RootFamily.BL5: 4,
    RootFamily.BL6: 5,
}


@dataclass(frozen=True)
class ModeTable:
    """Labeled exact roots, amplitudes, and wall data on a set of nodes.

    All arrays share the node shape.  `a` holds the three-layer amplitudes of
    the full wall-matching system; `a_lift` the amplitudes actually used in
    the assembled solution (equal to `a` except in the degenerate regime,
    where the slow layer is dropped and (u, w) are re-lifted pairwise).
    """

    params: RegimeParams
    eps: float
    k: np.ndarray
    m: np.ndarray
    omega: np.ndarray
    zeta: np.ndarray
    lam: dict  # RootFamily -> array of exact roots
    B: dict  # RootFamily -> buoyancy component, decaying families only
    a: dict  # RootFamily -> amplitude from the 3x3 system
    a_lift: dict  # RootFamily -> amplitude used in the assembled solution
    det: np.ndarray
    rhs: tuple  # (fu, fw, fb)
    degenerate: bool

    @property
    def families(self):
        return tuple(self.lam.keys())


def pointwise_frequency(k, m, gamma):
    """Frequency on the branch propagating toward the wall, node by node."""
    k = np.asarray(k, float)
    m = np.asarray(m, float)
    sg, cg = math.sin(gamma), math.cos(gamma)
    om_plus = (k * cg - m * sg) / np.hypot(k, m)
    dm_plus = -k * (k * sg + m * cg) / (k * k + m * m) ** 1.5
    return np.where(dm_plus < 0, om_plus, -om_plus)


def mode_table(params: RegimeParams, eps, k, m, polish_iters=6) -> ModeTable:
    """Solve the full layer problem at every node (k, m).

    Steps: per-node frequency/criticality, exact sextic roots, dominant-
    balance labeling, eigenvector components, and the wall amplitude system.
    """
    k = np.atleast_1d(np.asarray(k, float))
    m = np.atleast_1d(np.asarray(m, float))
    g = params.gamma
    omega = pointwise_frequency(k, m, g)
    zeta = omega**2 - math.sin(g) ** 2
    nu, kappa = viscosity_diffusivity(params, eps)

    coeffs = charpoly_coeffs(nu, kappa, omega, zeta, k, g)
    roots = find_roots(coeffs, polish_iters=polish_iters)
    preds, _, fams = predicted_root_table(params, eps, k, omega, zeta)
    slot_of_root = assign_roots(roots, preds)

    lam_by_slot = np.empty_like(roots)
    np.put_along_axis(lam_by_slot, slot_of_root, roots, axis=-1)
    lam = {fam: lam_by_slot[..., i] for i, fam in enumerate(fams)}

    dec_fams = [fams[1], fams[2], fams[4]]  # bl2-or-degenerate, bl3, bl5
    lams = tuple(lam[f] for f in dec_fams)
    Bs = tuple(eigenvector(k, lam[f], omega, kappa, g)[2] for f in dec_fams)
    rhs = incident_trace_setupless(k, m, omega, g)
    a_tuple, det = solve_amplitudes(k, lams, Bs, rhs, eps=eps)
    a = dict(zip(dec_fams, a_tuple))

    degenerate = params.case_id == Case.CASE5 and params.beta >= 8
    if degenerate:
        a3L, a5L = solve_uw_pair(k, lam[fams[2]], lam[fams[4]], rhs[0], rhs[1])
        a_lift = {fams[1]: np.zeros_like(a3L), fams[2]: a3L, fams[4]: a5L}
    else:
        a_lift = dict(a)

    return ModeTable(
        params=params, eps=float(eps), k=k, m=m, omega=omega, zeta=zeta,
        lam=lam, B=dict(zip(dec_fams, Bs)), a=a, a_lift=a_lift,
        det=det, rhs=rhs, degenerate=degenerate,
    )


def incident_trace_setupless(k, m, omega, gamma):
    """Negated incident wall trace without a CriticalSetup (per-node omega)."""
    m = np.asarray(m, float)
    if np.any(m == 0):
        raise DomainError("m = 0 is outside the packet support")
    k = np.asarray(k, float)
    sg, cg = math.sin(gamma), math.cos(gamma)
    u = np.ones(np.broadcast(k, m).shape, complex)
    b = 1j * (k * cg - m * sg) / (m * omega)
    return -u, k / m + 0j, -1j * m * b


def center_modes(params: RegimeParams, setup: CriticalSetup):
    """BoundaryLayerMode triple at the packet center (k0, m0)."""
    t = mode_table(params, setup.eps, setup.k0, setup.m0)
    nu, kappa = viscosity_diffusivity(params, setup.eps)
    out = []
    for fam in t.a:
        lam = complex(t.lam[fam][0])
        U, W, B = eigenvector(setup.k0, lam, float(t.omega[0]), kappa, params.gamma)
        P = pressure(setup.k0, lam, float(t.omega[0]), nu, kappa, params.gamma)
        out.append(
            BoundaryLayerMode(
                lam=lam, U=complex(U), W=complex(W), B=complex(B), P=complex(P),
                amplitude=complex(t.a[fam][0]), family=fam,
            )
        )
    return out


def det_orders(params: RegimeParams, eps_values):
    """Center-node determinant across an eps sweep plus its fitted exponent.

    Returns (values, ExponentFit).
    """
    from .regime import critical_wavenumber

    eps_values = np.asarray(eps_values, float)
    vals = []
    for e in eps_values:
        setup = critical_wavenumber(params, float(e))
        t = mode_table(params, float(e), setup.k0, setup.m0)
        vals.append(abs(complex(t.det[0])))
    from .diagnostics import fit_exponent

    fit = fit_exponent(list(zip(eps_values.tolist(), vals)))
    return np.asarray(vals), fit
