"""Characteristic polynomial of the boundary-layer ansatz, its six roots,
and their classification against per-regime dominant-balance predictions.

Plugging u = U exp(ikx - lam*y - i*omega*t) (and likewise w, b, p) into the
dissipative system reduces solvability to a degree-6 polynomial
P(lam) = det A(omega, kappa, nu, k, lam).  Writing P(lam) = sum_n c_n lam^n,
cofactor expansion of the symbol matrix gives

    c6 = -kappa*nu
    c5 = 0
    c4 = -i*omega*(kappa+nu) + 3*nu*kappa*k^2
    c3 = 0
    c2 = zeta + 2i*omega*(kappa+nu)*k^2 - 3*nu*kappa*k^4
    c1 = -2i*k*sin(gamma)*cos(gamma)
    c0 = k^2*(cos(gamma)^2 - omega^2 - i*omega*(kappa+nu)*k^2 + nu*kappa*k^4)

with zeta = omega^2 - sin(gamma)^2.  The sign of the dissipative cross term
+3*nu*kappa*k^2 in c4 is pinned by the determinant identity
P(lam) = -nu*kappa*s^3 - i*omega*(nu+kappa)*s^2 + omega^2*s
         - sin(g)^2*lam^2 + k^2*cos(g)^2 - 2ik*sin(g)*cos(g)*lam,  s = lam^2 - k^2,
and is verified against the symbol matrix by the kernel tests; the term is
subleading in every dominant balance, so no root asymptotics depend on it.
Each root scales like lam ~ lam_bar * eps^q with a regime-dependent exponent
q determined by dominant balance; the reduced cubic/quadratic/linear
equations solved here give the leading roots used to label the exact ones.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError, DomainError, NumericalError
from .regime import Case, CriticalSetup, RegimeParams, viscosity_diffusivity

#: Relative residual bound for polished roots: |P(lam)| <= RTOL * max|c_n| * max(1,|lam|)^6.
ROOT_RESIDUAL_RTOL = 1e-10

_PERMS6 = np.array(list(itertools.permutations(range(6))), dtype=np.intp)  # (720, 6)


class RootFamily(enum.Enum):
    """Labels for the six roots of P.

    INCIDENT is the order-one root tracking the incident wave; BL2/BL3 the
    decaying pair of the slow balance, BL4 its growing partner; BL5/BL6 the
    decaying/growing pair of the fast dissipative balance.  DEGENERATE marks
    the slowly-decaying near-imaginary root of the equal-dissipation regime
    with beta >= 8.
    """

    INCIDENT = "incident"
    BL2 = "bl2"
    BL3 = "bl3"
    BL4 = "bl4"
    BL5 = "bl5"
    BL6 = "bl6"
    DEGENERATE = "degenerate"


#: Families with Re(lam) > 0, used to lift the boundary conditions.
DECAYING_FAMILIES = (RootFamily.BL2, RootFamily.BL3, RootFamily.BL5, RootFamily.DEGENERATE)


@dataclass(frozen=True)
class CharPoly:
    """Degree-6 characteristic polynomial with ascending coefficients c0..c6."""

    coeffs: np.ndarray
    nu: float
    kappa: float
    omega: float
    zeta: float
    k: float
    gamma: float

    def __call__(self, lam):
        return polyval(self.coeffs, lam)


@dataclass(frozen=True)
class ClassifiedRoot:
    """One exact root with its family label.

    q_fit is the crude single-point scale estimate log|lam| / log(eps);
    sweep-fitted exponents live in the diagnostics layer.
    """

    lam: complex
    family: RootFamily
    q_fit: float
    decays: bool


def charpoly_coeffs(nu, kappa, omega, zeta, k, gamma):
    """Ascending coefficients c0..c6, broadcast over array-valued omega/zeta/k.

    Returns shape broadcast(omega, zeta, k).shape + (7,).
    """
    if np.any(np.asarray(nu) <= 0) or np.any(np.asarray(kappa) <= 0):
        raise DomainError("nu and kappa must be positive")
    if np.any(np.asarray(k) == 0):
        raise DomainError("k = 0 is outside the packet support")
    omega, zeta, k = np.broadcast_arrays(
        np.asarray(omega, float), np.asarray(zeta, float), np.asarray(k, float)
    )
    sg, cg = math.sin(gamma), math.cos(gamma)
    c = np.zeros(omega.shape + (7,), dtype=complex)
    c[..., 6] = -kappa * nu
    c[..., 4] = -1j * omega * (kappa + nu) + 3 * nu * kappa * k**2
    c[..., 2] = zeta + 2j * omega * (kappa + nu) * k**2 - 3 * nu * kappa * k**4
    c[..., 1] = -2j * k * sg * cg
    c[..., 0] = k**2 * (cg**2 - omega**2 - 1j * omega * (kappa + nu) * k**2 + nu * kappa * k**4)
    return c


def build_charpoly(nu, kappa, omega, zeta, k, gamma) -> CharPoly:
    """Scalar convenience wrapper around :func:`charpoly_coeffs`."""
    coeffs = charpoly_coeffs(nu, kappa, omega, zeta, k, gamma)
    return CharPoly(coeffs=coeffs, nu=nu, kappa=kappa, omega=omega, zeta=zeta, k=k, gamma=gamma)


def polyval(coeffs, lam):
    """Horner evaluation of an ascending-coefficient polynomial."""
    coeffs = np.asarray(coeffs)
    lam = np.asarray(lam, complex)
    out = np.zeros(np.broadcast(coeffs[..., 0], lam).shape, dtype=complex)
    for n in range(coeffs.shape[-1] - 1, -1, -1):
        out = out * lam + coeffs[..., n]
    return out if out.ndim else complex(out)


def _polyval_roots(coeffs, lam):
    """Horner where lam has one more trailing axis than coeffs (roots axis)."""
    out = np.zeros(lam.shape, dtype=np.result_type(coeffs.dtype, lam.dtype))
    for n in range(coeffs.shape[-1] - 1, -1, -1):
        out = out * lam + coeffs[..., n][..., None]
    return out


def _newton_polish(coeffs, roots, iters):
    dcoeffs = coeffs[..., 1:] * np.arange(1, coeffs.shape[-1], dtype=coeffs.real.dtype)
    lam = roots.astype(coeffs.dtype)
    for _ in range(iters):
        p = _polyval_roots(coeffs, lam)
        dp = _polyval_roots(dcoeffs, lam)
        safe = dp != 0
        lam = lam - np.where(safe, p / np.where(safe, dp, 1), 0.0)
    return lam


def find_roots(poly, polish_iters=6, rtol=ROOT_RESIDUAL_RTOL):
    """All six roots of P via companion-matrix eigenvalues plus Newton polish.

    Accepts a CharPoly or an ascending coefficient array of shape (..., 7);
    returns roots of shape (..., 6) in no particular order (multiplicities
    repeated).  Coefficients are normalized by max|c_n| before the companion
    matrix is formed, which keeps the construction well-scaled even when
    c6 ~ eps^(beta+6) is many orders below the other coefficients.

    Raises NumericalError if any polished root violates
    |P(lam)| <= rtol * max|c_n| * max(1, |lam|)^6.
    """
    coeffs = poly.coeffs if isinstance(poly, CharPoly) else np.asarray(poly, complex)
    scalar_input = coeffs.ndim == 1
    coeffs = coeffs[None, :] if scalar_input else coeffs
    if coeffs.shape[-1] != 7:
        raise DomainError(f"expected 7 coefficients, got {coeffs.shape[-1]}")
    if np.any(coeffs[..., 6] == 0):
        raise DomainError("leading coefficient c6 vanishes; the polynomial is not degree 6")

    scale = np.abs(coeffs).max(axis=-1, keepdims=True)
    cn = coeffs / scale
    monic = cn[..., :6] / cn[..., 6:7]
    comp = np.zeros(cn.shape[:-1] + (6, 6), dtype=complex)
    comp[..., np.arange(1, 6), np.arange(5)] = 1.0
    comp[..., :, 5] = -monic
    roots = np.linalg.eigvals(comp)

    roots = _newton_polish(cn, roots, polish_iters)
    if np.dtype(np.clongdouble).itemsize > np.dtype(complex).itemsize:
        # extended-precision touch-up; matters for the near-resonant fast roots
        roots = _newton_polish(cn.astype(np.clongdouble), roots.astype(np.clongdouble), 2)
    roots = roots.astype(complex)

    res = np.abs(_polyval_roots(cn, roots))
    bound = rtol * np.maximum(1.0, np.abs(roots)) ** 6
    if np.any(res > bound):
        worst = float((res / bound).max())
        raise NumericalError(
            f"root polishing did not meet the residual bound (worst ratio {worst:.3g})",
            residual=float(res.max()),
        )
    return roots[0] if scalar_input else roots


def _quadratic_roots(a, c):
    """Roots of a*lam^2 + c = 0; returned as (..., 2), decaying one first."""
    r = np.sqrt(-np.asarray(c, complex) / np.asarray(a, complex))
    pair = np.stack([r, -r], axis=-1)
    order = np.argsort(-pair.real, axis=-1, kind="stable")
    return np.take_along_axis(pair, order, axis=-1)


def _cubic_roots(a3, a1, a0):
    """Roots of a3 lam^3 + a1 lam + a0 = 0 via batched 3x3 companion."""
    a3, a1, a0 = np.broadcast_arrays(
        np.asarray(a3, complex), np.asarray(a1, complex), np.asarray(a0, complex)
    )
    comp = np.zeros(a3.shape + (3, 3), dtype=complex)
    comp[..., 1, 0] = 1.0
    comp[..., 2, 1] = 1.0
    comp[..., 0, 2] = -a0 / a3
    comp[..., 1, 2] = -a1 / a3
    r = np.linalg.eigvals(comp)
    for _ in range(2):
        p = a3[..., None] * r**3 + a1[..., None] * r + a0[..., None]
        dp = 3 * a3[..., None] * r**2 + a1[..., None]
        safe = dp != 0
        r = r - np.where(safe, p / np.where(safe, dp, 1), 0)
    return r


def _split_cubic(roots3):
    """(decaying pair sorted by ascending argument, growing root).

    Sorting by descending real part first makes the split robust at
    packet-edge wavenumbers where the local criticality changes sign.
    """
    order = np.argsort(-roots3.real, axis=-1, kind="stable")
    s = np.take_along_axis(roots3, order, axis=-1)
    pair = s[..., :2]
    pair = np.take_along_axis(pair, np.argsort(np.angle(pair), axis=-1, kind="stable"), axis=-1)
    return pair, s[..., 2]


def incident_root(k, omega, gamma):
    """Leading order of the O(1) root tracking the incident wave:
    lam1 ~ -i k (cos(gamma)^2 - omega^2) / (2 sin(gamma) cos(gamma))."""
    sg, cg = math.sin(gamma), math.cos(gamma)
    out = -1j * np.asarray(k, float) * (cg**2 - np.asarray(omega, float) ** 2) / (2 * sg * cg)
    return complex(out) if out.ndim == 0 else out


def slot_families(params: RegimeParams):
    """Canonical family labels of the six prediction slots."""
    bl2 = (
        RootFamily.DEGENERATE
        if (params.case_id == Case.CASE5 and params.beta >= 8)
        else RootFamily.BL2
    )
    return [RootFamily.INCIDENT, bl2, RootFamily.BL3, RootFamily.BL4, RootFamily.BL5, RootFamily.BL6]


def predicted_root_table(params: RegimeParams, eps, k, omega, zeta):
    """Per-regime leading roots in canonical slot order, broadcast over nodes.

    Slots: [INCIDENT, BL2, BL3, BL4, BL5, BL6].  Returns (preds, q, families)
    where preds has shape broadcast(k, omega, zeta).shape + (6,) and q is the
    6-vector of scale exponents.  The reduced equations are solved exactly in
    unscaled variables, so per-node frequency/criticality variation across a
    packet lobe is honored; the values serve as labels for the exact roots,
    not as quantitative approximations at the lobe edges.
    """
    k, omega, zeta = np.broadcast_arrays(
        np.asarray(k, float), np.asarray(omega, float), np.asarray(zeta, float)
    )
    nu, kappa = viscosity_diffusivity(params, eps)
    g = params.gamma
    sg, cg = math.sin(g), math.cos(g)
    b = params.beta
    case = params.case_id
    rhs = -2j * k * sg * cg
    lam1 = np.broadcast_to(incident_root(k, omega, g), k.shape)

    if case == Case.CASE5:
        # keep the label finite at (rare, zero-weight) nodes where zeta ~ 0
        zsafe = np.where(np.abs(zeta) < 1e-6 * eps**2, 1e-6 * eps**2, zeta)
        lam2 = -rhs / zsafe
        mid = _quadratic_roots(-1j * omega * (nu + kappa), zeta)
        fast = _quadratic_roots(-nu * kappa, -1j * omega * (nu + kappa))
        preds = np.stack(
            [lam1, lam2, mid[..., 0], mid[..., 1], fast[..., 0], fast[..., 1]], axis=-1
        )
        q = np.array([0.0, -2.0, -(b - 2) / 2, -(b - 2) / 2, -b / 2, -b / 2])
        return preds, q, slot_families(params)

    if case == Case.CASE1:
        cubic = _cubic_roots(-1j * omega * kappa, 0.0, rhs)
        quad = _quadratic_roots(-nu, -1j * omega)
        q_slow, q_fast = -b / 3, -3.0
    elif case == Case.CASE2:
        cubic = _cubic_roots(-1j * omega * nu, zeta, rhs)
        quad = _quadratic_roots(-kappa, -1j * omega)
        q_slow, q_fast = -2.0, -b / 2
    elif case == Case.CASE3:
        cubic = _cubic_roots(-1j * omega * nu, 0.0, rhs)
        quad = _quadratic_roots(-kappa, -1j * omega)
        q_slow, q_fast = -b / 3, -3.0
    else:  # CASE4
        cubic = _cubic_roots(-1j * omega * kappa, zeta, rhs)
        quad = _quadratic_roots(-nu, -1j * omega)
        q_slow, q_fast = -2.0, -b / 2

    pair, grow = _split_cubic(cubic)
    preds = np.stack(
        [lam1, pair[..., 0], pair[..., 1], grow, quad[..., 0], quad[..., 1]], axis=-1
    )
    q = np.array([0.0, q_slow, q_slow, q_slow, q_fast, q_fast])
    return preds, q, slot_families(params)


def predicted_roots(params: RegimeParams, setup: CriticalSetup, k=None):
    """Leading roots at a single wavenumber (defaults to the packet center).

    Returns a list of (family, lambda, q) triples in canonical slot order.
    """
    if k is None:
        k = setup.k0
    preds, q, fams = predicted_root_table(params, setup.eps, k, setup.omega, setup.zeta)
    return [(fams[i], complex(preds[i]), float(q[i])) for i in range(6)]


def _log_polar_cost(roots, preds):
    """Pairwise squared distance in (log|lam|, arg lam)."""
    lr = np.log(np.abs(roots))[..., :, None]
    lp = np.log(np.abs(preds))[..., None, :]
    da = np.angle(roots)[..., :, None] - np.angle(preds)[..., None, :]
    da = (da + np.pi) % (2 * np.pi) - np.pi
    return (lr - lp) ** 2 + da**2


#: Required sign of Re(lam) per slot: the three lifting slots take decaying
#: roots, the incident and the two growing partners take the rest.
_SLOT_SIGNS = np.array([-1, +1, +1, -1, +1, -1])

#: Penalty that makes sign-violating assignments strictly worse than any
#: sign-respecting one.
_SIGN_PENALTY = 1e6


def assign_roots(roots, preds, chunk=512):
    """Slot index for each exact root, minimizing the total log-polar
    distance over all 6! bijections, subject to the decay partition: slots
    bl2/bl3/bl5 only accept roots with Re > 0.  Deterministic; batched over
    the leading axes.  Returns integer indices with ``roots`` shape: root i
    of a node is assigned to prediction slot ``out[..., i]``.

    The sign constraint matters at packet-edge wavenumbers where the local
    criticality crosses zero and the slow-balance prediction wanders near a
    growing root; the exact sextic always keeps three decaying roots, and
    the lifting construction must use exactly those.
    """
    roots = np.asarray(roots)
    preds = np.asarray(preds)
    flat_r = roots.reshape(-1, 6)
    flat_p = preds.reshape(-1, 6)
    out = np.empty(flat_r.shape, dtype=np.intp)
    rows = np.arange(6)
    for lo in range(0, flat_r.shape[0], chunk):
        hi = min(lo + chunk, flat_r.shape[0])
        cost = _log_polar_cost(flat_r[lo:hi], flat_p[lo:hi])  # (n, 6, 6)
        if not np.all(np.isfinite(cost)):
            raise ClassificationError("non-finite classification cost (zero root or prediction?)")
        root_sign = np.where(flat_r[lo:hi].real > 0, 1, -1)  # (n, 6)
        mismatch = root_sign[:, :, None] != _SLOT_SIGNS[None, None, :]
        cost = cost + np.where(mismatch, _SIGN_PENALTY, 0.0)
        # totals[n, t] = sum_i cost[n, i, perm_t[i]]
        totals = cost[:, rows, _PERMS6].sum(axis=-1)
        best = np.argmin(totals, axis=-1)
        if np.any(totals[np.arange(len(best)), best] >= _SIGN_PENALTY):
            raise ClassificationError(
                "no assignment respects the decay partition (root census != 3?)"
            )
        out[lo:hi] = _PERMS6[best]
    return out.reshape(roots.shape)


def classify_roots(roots, predictions, eps):
    """Label six exact roots using the prediction triples of
    :func:`predicted_roots`.  Returns ClassifiedRoot entries in slot order
    [INCIDENT, BL2, BL3, BL4, BL5, BL6]."""
    roots = np.asarray(roots, complex)
    if roots.shape != (6,):
        raise DomainError("classify_roots expects exactly six roots")
    fams = [p[0] for p in predictions]
    preds = np.array([p[1] for p in predictions])
    slot_of_root = assign_roots(roots, preds)
    by_slot = np.empty(6, dtype=complex)
    by_slot[slot_of_root] = roots
    out = []
    for i, fam in enumerate(fams):
        lam = complex(by_slot[i])
        out.append(
            ClassifiedRoot(
                lam=lam,
                family=fam,
                q_fit=float(math.log(abs(lam)) / math.log(eps)),
                decays=lam.real > 0,
            )
        )
    return out


def census(roots):
    """Number of roots with positive real part (decaying layers)."""
    n = np.count_nonzero(np.asarray(roots).real > 0, axis=-1)
    return int(n) if np.ndim(n) == 0 else n


def case5_lambda2_refined(params: RegimeParams, setup: CriticalSetup, k=None, omega=None, zeta=None):
    """Three-term expansion of the slow equal-dissipation root.

    lam2 ~ L0 + i*omega*(kappa+nu)*L0^4 / (2ik sg cg) - k^2 (cg^2 - omega^2) / (2ik sg cg)

    with L0 = 2ik sin(g) cos(g) / zeta.  The second term is real with sign
    sgn(omega * k) = +1 on both packet lobes and scales like eps^(beta-8):
    a genuine fast-decaying layer for beta < 8, an asymptotically vanishing
    decay rate (degenerate layer) for beta > 8.
    """
    if params.case_id != Case.CASE5:
        raise DomainError("the refined slow-root expansion applies to the equal-dissipation case only")
    if k is None:
        k = setup.k0
    if omega is None:
        omega = setup.omega
    if zeta is None:
        zeta = setup.zeta
    nu, kappa = viscosity_diffusivity(params, setup.eps)
    g = params.gamma
    sg, cg = math.sin(g), math.cos(g)
    k = np.asarray(k, float)
    omega = np.asarray(omega, float)
    zeta = np.asarray(zeta, float)
    denom = 2j * k * sg * cg
    L0 = denom / zeta
    out = L0 + 1j * omega * (kappa + nu) * L0**4 / denom - k**2 * (cg**2 - omega**2) / denom
    return complex(out) if out.ndim == 0 else out
