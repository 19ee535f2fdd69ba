"""Measurements and verification: norms, interior/wall residuals, power-law
exponent fits over eps sweeps, and machine-checked tables comparing every
fitted exponent against its predicted value.

The L2 norm of a packet uses Plancherel in x (the lobes are disjoint in k)
together with exact integration of the exponential pairs in y:

    ||W||^2 = 2*pi * int dk  sum_{jj'} c_j conj(c_j') / (rho_j + conj(rho_j'))

which handles oscillatory-decaying layers whose phase turns over millions of
times across their decay length; no y grid could resolve those.  For free
(non-decaying) packets the y integral is truncated at a range Y chosen inside
the resolution of the spectral quadrature, with the truncation sensitivity
reported.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError
from .regime import (
    Case,
    CriticalSetup,
    RegimeParams,
    critical_wavenumber,
    dissipation_exponents,
    viscosity_diffusivity,
)
from .spectrum import RootFamily, case5_lambda2_refined, census, predicted_root_table
from .modes import mode_table, wall_row_residuals
from .packets import (
    COMPONENTS,
    FieldSample,
    Grid,
    PacketSpectral,
    WavePacketSpec,
    app_packets,
    boundary_layer_packets,
    chi_norms,
    default_grid,
    envelope,
    incident_packet,
    packet_layout,
    residual_packet,
    synth,
)

# ---------------------------------------------------------------------------
# tolerances (fitted exponent vs predicted), pinned once

TOL_ROOT_Q = 0.05
TOL_RE_LAM2 = 0.15
TOL_AMP = 0.15
TOL_DET = 0.15
TOL_SIZE = 0.25
TOL_INC = 0.10
TOL_RESID = 0.25
TOL_FD_ORDER = 0.20
WALL_LIFT_RTOL = 1e-8

#: eps sweeps: scalar (center-node) quantities afford a wider window, which
#: suppresses the slowly-decaying subleading corrections near exponent
#: branch points; field quantities use the standard decade.
SCALAR_EPS = np.logspace(-2.5, -1, 10)
FIELD_EPS = np.logspace(-2, -1, 8)

#: Default verification matrix: (case, beta) pairs.
DEFAULT_MATRIX = (
    (Case.CASE1, 3.0), (Case.CASE1, 5.0),
    (Case.CASE2, 7.0), (Case.CASE2, 9.0),
    (Case.CASE3, 3.0), (Case.CASE3, 5.0),
    (Case.CASE4, 7.0), (Case.CASE4, 9.0),
    (Case.CASE5, 7.0), (Case.CASE5, 9.0), (Case.CASE5, 11.0),
)

_SLOT_NAMES = ("incident", "bl2", "bl3", "bl4", "bl5", "bl6")


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares power law value ~ C * eps^slope over an eps sweep."""

    samples: tuple  # ((eps, value), ...)
    slope: float
    intercept: float
    r2: float


def fit_exponent(samples) -> ExponentFit:
    """Fit log(value) against log(eps).

    Requires at least 4 strictly positive samples spanning a decade of eps.
    """
    samples = [(float(e), float(v)) for e, v in samples]
    if len(samples) < 4:
        raise DomainError("need at least 4 samples to fit an exponent")
    eps = np.array([s[0] for s in samples])
    val = np.array([s[1] for s in samples])
    if np.any(val <= 0) or np.any(eps <= 0):
        raise DomainError("exponent fits require positive samples")
    if eps.max() / eps.min() < 10 * (1 - 1e-9):
        raise DomainError("eps samples must span at least one decade")
    lx, ly = np.log(eps), np.log(val)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(samples=tuple(samples), slope=float(slope), intercept=float(intercept), r2=r2)


def stability_bound(t, nu, kappa):
    """The drift bound sqrt((nu+kappa) t) * exp(max(nu, kappa) t) controlling
    the distance between the assembled solution and the true weak solution."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    return math.sqrt((nu + kappa) * t) * math.exp(max(nu, kappa) * t)


# ---------------------------------------------------------------------------
# norms


def _truncated_kernel(s, y_trunc):
    """int_0^Y exp(-s y) dy, elementwise; Y = inf when y_trunc is None."""
    if y_trunc is None:
        return 1.0 / s
    sy = s * y_trunc
    small = np.abs(sy) < 1e-6
    safe = np.where(small, 1.0, s)
    with np.errstate(over="ignore", under="ignore"):
        out = (1.0 - np.exp(-np.where(small, 0.0, sy))) / safe
    series = y_trunc * (1.0 - sy / 2.0 + sy * sy / 6.0)
    return np.where(small, series, out)


def l2_norm(packets, y_trunc=None, components=(0, 1, 2), t=0.0):
    """Exact-in-y L2(half-plane) norm of a packet sum.

    Returns (total, per_component) where per_component has one entry per
    requested component index.  All packets must share lobe quadratures.
    """
    if isinstance(packets, PacketSpectral):
        packets = [packets]
    comp_sq = np.zeros(len(components))
    n_lobes = len(packets[0].lobes)
    for il in range(n_lobes):
        ref = packets[0].lobes[il]
        rho = []
        coefw = []
        for pk in packets:
            lb = pk.lobes[il]
            if not np.allclose(lb.k, ref.k):
                raise DomainError("packets must share lobe quadratures for a joint norm")
            tphase = np.exp(-1j * lb.omega * t)
            for br in lb.branches:
                rho.append(br.rho)
                coefw.append(br.coef * (lb.wm[None, None, :] * tphase[None, :, :]))
        rho = np.stack(rho)  # (nb, nk, nm)
        coefw = np.stack(coefw)  # (nb, 4, nk, nm)
        nb, nk, nm = rho.shape
        rho_k = rho.transpose(1, 0, 2).reshape(nk, nb * nm)
        s = rho_k[:, :, None] + rho_k.conj()[:, None, :]
        ker = _truncated_kernel(s, y_trunc)
        for ci, c in enumerate(components):
            v = coefw[:, c].transpose(1, 0, 2).reshape(nk, nb * nm)
            sk = np.einsum("kj,kl,kjl->k", v, v.conj(), ker)
            comp_sq[ci] += 2 * np.pi * float(np.sum(ref.wk * sk.real))
    comp_sq = np.maximum(comp_sq, 0.0)
    return float(np.sqrt(comp_sq.sum())), np.sqrt(comp_sq)


def l2_truncation_estimate(packets, y_trunc):
    """Sensitivity of the truncated norm to the cutoff (reported error bar)."""
    full, _ = l2_norm(packets, y_trunc=y_trunc)
    shorter, _ = l2_norm(packets, y_trunc=0.8 * y_trunc)
    return abs(full - shorter)


def grid_for_packets(packets, eps, nx=96, ny=160, t=0.0, k0=1.0):
    """Evaluation grid adapted to the decay content of the packets."""
    res = []
    for pk in packets:
        for lb in pk.lobes:
            for br in lb.branches:
                if pk.decaying:
                    res.append((br.rho.real.min(), br.rho.real.max()))
    x = np.linspace(0.0, 2 * np.pi / abs(k0), nx, endpoint=False)
    if res:
        min_decay = max(min(r[0] for r in res), 1e-300)
        max_decay = max(r[1] for r in res)
        y = np.concatenate([[0.0], np.geomspace(0.02 / max_decay, math.log(1e12) / min_decay, ny - 1)])
    else:
        y = np.concatenate([[0.0], np.geomspace(1e-4 / eps**2, 8.0 / eps**2, ny - 1)])
    return Grid(x=x, y=y, t=t)


def linf_norm(packets, eps, grid=None, k0=1.0):
    """Grid maximum of max(|u|, |w|, |b|) with wall refinement."""
    if isinstance(packets, PacketSpectral):
        packets = [packets]
    if grid is None:
        grid = grid_for_packets(packets, eps, k0=k0)
    return synth(packets, grid).vector_linf


def norms(packets, eps, y_trunc=None, grid=None, k0=1.0):
    """(L2, Linf) of a packet or packet sum over the half-plane.

    Oscillatory (free-wave) content requires a finite y truncation; it is
    chosen automatically inside the spectral resolution limit when absent,
    and its sensitivity is checked against a 1 percent contract.
    """
    if isinstance(packets, PacketSpectral):
        packets = [packets]
    needs_trunc = any(not pk.decaying for pk in packets)
    if needs_trunc and y_trunc is None:
        y_trunc = 30.0 / eps**2
    l2, _ = l2_norm(packets, y_trunc=y_trunc)
    if needs_trunc:
        tail = l2_truncation_estimate(packets, y_trunc)
        if tail > 0.01 * l2:
            raise AccuracyError(f"y-truncation sensitivity {tail/l2:.2e} exceeds 1% of the norm")
    return l2, linf_norm(packets, eps, grid=grid, k0=k0)


# ---------------------------------------------------------------------------
# wall residuals


@dataclass(frozen=True)
class WallReport:
    """Sup over x of the wall rows of the assembled solution at y = 0."""

    res_u: float
    res_w: float
    res_dyb: float
    scale_u: float
    scale_w: float
    scale_dyb: float
    degenerate: bool

    @property
    def ratios(self):
        return (
            self.res_u / self.scale_u,
            self.res_w / self.scale_w,
            self.res_dyb / self.scale_dyb,
        )


def _wall_profile(spec, tables, values_per_table, x):
    """sup_x |int A(k,m) v(k,m) e^{ikx} dk dm| from per-node values v."""
    acc = np.zeros(len(x), complex)
    for (lobe_sign, table), vals in zip(zip((+1, -1), tables), values_per_table):
        k, wk, m, wm = spec.lobe_nodes(lobe_sign)
        K, M = np.meshgrid(k, m, indexing="ij")
        A = envelope(spec, K, M)
        v = A * vals.reshape(K.shape)
        g = v @ wm
        acc += np.exp(1j * np.outer(x, k)) @ (wk * g)
    return float(np.abs(acc).max())


def boundary_residual(params, setup, spec, tables=None, x=None) -> WallReport:
    """Wall residual of the assembled solution, from the per-node row
    mismatches of the lift amplitudes (extended-precision cancellation).

    In the regular regimes all three rows vanish to rounding; in the
    degenerate equal-dissipation regime only (u, w) cancel and the d_y b row
    carries the contribution of the dropped slow layer.
    """
    if tables is None:
        _, tables = boundary_layer_packets(params, setup, spec, amplitudes="lift")
    if x is None:
        x = np.linspace(0, 2 * np.pi / abs(setup.k0), 96, endpoint=False)
    rows_per_table = []
    scales_per_table = []
    for t in tables:
        fams = list(t.a_lift.keys())
        lams = tuple(t.lam[f] for f in fams)
        Bs = tuple(t.B[f] for f in fams)
        a = tuple(t.a_lift[f] for f in fams)
        ru, rw, rb = wall_row_residuals(t.k, lams, Bs, t.rhs, a)
        rows_per_table.append((ru, rw, rb))
        scales_per_table.append(tuple(-r for r in t.rhs))  # incident traces
    res = [
        _wall_profile(spec, tables, [rows[i] for rows in rows_per_table], x)
        for i in range(3)
    ]
    scales = [
        _wall_profile(spec, tables, [sc[i] for sc in scales_per_table], x)
        for i in range(3)
    ]
    return WallReport(
        res_u=res[0], res_w=res[1], res_dyb=res[2],
        scale_u=scales[0], scale_w=scales[1], scale_dyb=scales[2],
        degenerate=tables[0].degenerate,
    )


# ---------------------------------------------------------------------------
# interior residual, spectral and finite-difference


@dataclass(frozen=True)
class ResidualReport:
    l2_Ru: float
    l2_Rw: float
    l2_Rb: float
    boundary_res_u: float
    boundary_res_w: float
    boundary_res_dyb: float
    eps: float
    case: int
    beta: float


def pde_residual(params, setup, spec, tables=None) -> ResidualReport:
    """L2 sizes of the interior defect plus wall residuals."""
    rp = residual_packet(params, setup, spec)
    y_trunc = 30.0 / setup.eps**2
    _, per = l2_norm(rp, y_trunc=y_trunc, components=(0, 1, 2))
    wall = boundary_residual(params, setup, spec, tables=tables)
    return ResidualReport(
        l2_Ru=float(per[0]), l2_Rw=float(per[1]), l2_Rb=float(per[2]),
        boundary_res_u=wall.res_u, boundary_res_w=wall.res_w, boundary_res_dyb=wall.res_dyb,
        eps=setup.eps, case=int(params.case_id), beta=params.beta,
    )


def fd_residual(packets, params, eps, points, t, h):
    """Centered-difference PDE residual rows at probe points (x, y).

    Every derivative, including d_t, is a second-order central difference of
    synthesized fields; nothing is taken from the spectral representation.
    """
    nu, kappa = viscosity_diffusivity(params, eps)
    sg, cg = math.sin(params.gamma), math.cos(params.gamma)
    out_u, out_w, out_b = [], [], []
    for (x0, y0) in points:
        xg = np.array([x0 - h, x0, x0 + h])
        yg = np.array([y0 - h, y0, y0 + h])
        if y0 - h < 0:
            raise DomainError("probe too close to the wall for this stencil")
        f0 = synth(packets, Grid(x=xg, y=yg, t=t))
        fm = synth(packets, Grid(x=np.array([x0]), y=np.array([y0]), t=t - h))
        fp = synth(packets, Grid(x=np.array([x0]), y=np.array([y0]), t=t + h))

        def lap(a):
            return (a[0, 1] + a[2, 1] + a[1, 0] + a[1, 2] - 4 * a[1, 1]) / h**2

        def dx(a):
            return (a[2, 1] - a[0, 1]) / (2 * h)

        def dy(a):
            return (a[1, 2] - a[1, 0]) / (2 * h)

        def dt(comp):
            return (getattr(fp, comp)[0, 0] - getattr(fm, comp)[0, 0]) / (2 * h)

        u, w, b, p = f0.u, f0.w, f0.b, f0.p
        out_u.append(dt("u") - b[1, 1] * sg + dx(p) - nu * lap(u))
        out_w.append(dt("w") - b[1, 1] * cg + dy(p) - nu * lap(w))
        out_b.append(dt("b") + u[1, 1] * sg + w[1, 1] * cg - kappa * lap(b))
    return np.array(out_u), np.array(out_w), np.array(out_b)


def fd_convergence_order(params, setup, spec, points=None, t=0.0, h0=None, levels=3):
    """Order of agreement between spectral and centered-difference residuals.

    Measures max |R_fd - R_spectral| over probe points at h0, h0/2, ... and
    fits the slope in log h; a correct synthesis gives order 2.
    """
    packs, tables = app_packets(params, setup, spec)
    rp = residual_packet(params, setup, spec)
    max_decay = max(
        br.rho.real.max() for pk in packs if pk.decaying for lb in pk.lobes for br in lb.branches
    )
    if points is None:
        y0 = 1.0 / max_decay
        points = [(0.3, y0), (1.1, 2 * y0), (2.3, 4 * y0)]
    if h0 is None:
        h0 = 0.05 / max_decay
    hs, errs = [], []
    for lev in range(levels):
        h = h0 / 2**lev
        ru, rw, rb = fd_residual(packs, params, setup.eps, points, t, h)
        grid_pts = Grid(x=np.array([p[0] for p in points]), y=np.array([p[1] for p in points]), t=t)
        sp = synth(rp, grid_pts)
        su, sw, sb = np.diagonal(sp.u), np.diagonal(sp.w), np.diagonal(sp.b)
        err = max(
            np.abs(ru - su).max(), np.abs(rw - sw).max(), np.abs(rb - sb).max()
        )
        hs.append(h)
        errs.append(err)
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return slope, list(zip(hs, errs))


# ---------------------------------------------------------------------------
# predicted exponents per regime


@dataclass(frozen=True)
class PacketPrediction:
    name: str
    decay_exponent: float  # Re(lam) ~ eps^(-decay_exponent); lemma beta_j
    alpha: float  # amplitude order
    alpha_eff: float  # amplitude including an unbounded eigenvector factor
    linf_published: float
    l2_published: float
    linf_corrected: float
    l2_corrected: float
    published_defect: bool
    in_tables: bool  # gated against the published asymptotic tables


@dataclass(frozen=True)
class CasePredictions:
    root_q: dict  # slot name -> q
    b5_exponent: float  # = Prandtl exponent q_nu - q_kappa
    det_exponent: float
    amp_exponents: dict  # 'bl2'/'bl3'/'bl5' -> alpha
    packets: tuple  # PacketPrediction, in packet_layout order
    residual_exponent: float
    residual_nu_exponent: float
    residual_kappa_exponent: float
    incident_l2_exponent: float
    incident_linf_published: float
    incident_linf_corrected: float
    re_lam2_exponent: float | None  # case 5 only


def predictions(params: RegimeParams) -> CasePredictions:
    b = params.beta
    case = params.case_id
    q_nu, q_kappa = dissipation_exponents(params)
    _, q, _ = predicted_root_table(params, 0.05, 1.0, 0.5, 0.0025)
    root_q = dict(zip(_SLOT_NAMES, (float(v) for v in q)))
    b5 = q_nu - q_kappa

    if case in (Case.CASE1, Case.CASE3):
        a23 = -b / 3
    else:
        a23 = -2.0
    if case == Case.CASE1:
        a5 = -b / 3 if b < 4.5 else b / 3 - 3
        det = 0.0 if b < 4.5 else 3 - 2 * b / 3
    elif case == Case.CASE2:
        a5, det = 1.5 * b - 10, 8 - 1.5 * b
    elif case == Case.CASE3:
        a5, det = 9 - 5 * b / 3, 4 * b / 3 - 9
    elif case == Case.CASE4:
        a5 = 2 - b / 2 if b < 8 else -2.0
        det = b / 2 - 4 if b < 8 else 0.0
    else:
        a5, det = -1.0, 2 - b / 2

    def lemma(alpha_eff, beta_j):
        return alpha_eff + 2, (2 + beta_j + 2 * alpha_eff) / 2

    pkts = []
    if case in (Case.CASE1, Case.CASE2, Case.CASE3, Case.CASE4):
        beta_23 = b / 3 if case in (Case.CASE1, Case.CASE3) else 2.0
        beta_5 = 3.0 if case in (Case.CASE1, Case.CASE3) else b / 2
        li23, l2_23 = lemma(a23, beta_23)
        a5_eff = a5 + min(0.0, b5)  # fold in an unbounded buoyancy factor
        li5, l2_5 = lemma(a5_eff, beta_5)
        if case == Case.CASE3:
            li5_pub, l25_pub = 11 - 5 * b / 3, 23 / 2 - 5 * b / 3
            defect = True
        else:
            li5_pub, l25_pub = li5, l2_5
            defect = False
        pkts.append(PacketPrediction("bl23", beta_23, a23, a23, li23, l2_23, li23, l2_23, False, True))
        pkts.append(PacketPrediction("bl5", beta_5, a5, a5_eff, li5_pub, l25_pub, li5, l2_5, defect, True))
    else:
        li2, l2_2 = lemma(-2.0, 8 - b)
        li3, l2_3 = lemma(-2.0, b / 2 - 1)
        li5, l2_5 = lemma(-1.0, b / 2)
        pkts.append(PacketPrediction("bl2", 8 - b, -2.0, -2.0, li2, l2_2, li2, l2_2, False, False))
        pkts.append(PacketPrediction("bl3", b / 2 - 1, -2.0, -2.0, li3, l2_3, li3, l2_3, False, True))
        pkts.append(PacketPrediction("bl5", b / 2, -1.0, -1.0, li5, l2_5, li5, l2_5, False, True))

    return CasePredictions(
        root_q=root_q,
        b5_exponent=b5,
        det_exponent=det,
        amp_exponents={"bl2": a23, "bl3": a23, "bl5": a5},
        packets=tuple(pkts),
        residual_exponent=min(q_nu, q_kappa),
        residual_nu_exponent=q_nu,
        residual_kappa_exponent=q_kappa,
        incident_l2_exponent=0.0,
        incident_linf_published=0.0,
        incident_linf_corrected=2.0,
        re_lam2_exponent=(b - 8) if case == Case.CASE5 else None,
    )


# ---------------------------------------------------------------------------
# sweeps and verification tables


@dataclass(frozen=True)
class ReportRow:
    """One comparison of a fitted quantity against its predicted value."""

    case: int
    beta: float
    table: str
    label: str
    predicted: float
    fitted: float
    tol: float
    r2: float
    status: str  # PASS | FAIL | KNOWN-DEFECT | INFO
    note: str = ""

    @property
    def diff(self):
        return abs(self.fitted - self.predicted)


def _status(predicted, fitted, tol):
    return "PASS" if abs(fitted - predicted) <= tol else "FAIL"


def scalar_sweep(params: RegimeParams, eps_values=None):
    """Center-node quantities across eps: labeled |lam|, |det|, |a_j|, |B5|,
    the slow-root real part (equal-dissipation case), and the decay census."""
    eps_values = SCALAR_EPS if eps_values is None else np.asarray(eps_values, float)
    out = {
        "eps": eps_values,
        "lam": {name: [] for name in _SLOT_NAMES},
        "re_lam2": [],
        "lam2_refined_relerr": [],
        "det": [],
        "a": {"bl2": [], "bl3": [], "bl5": []},
        "b5": [],
        "census": [],
    }
    fam_of_slot = None
    t0 = time.perf_counter()
    for e in eps_values:
        setup = critical_wavenumber(params, float(e))
        t = mode_table(params, float(e), setup.k0, setup.m0)
        fam_of_slot = list(t.lam.keys())
        for name, fam in zip(_SLOT_NAMES, fam_of_slot):
            out["lam"][name].append(abs(complex(t.lam[fam][0])))
        dec_fams = list(t.a.keys())
        for name, fam in zip(("bl2", "bl3", "bl5"), dec_fams):
            out["a"][name].append(abs(complex(t.a[fam][0])))
        out["det"].append(abs(complex(t.det[0])))
        out["b5"].append(abs(complex(t.B[dec_fams[2]][0])))
        roots = np.array([complex(t.lam[f][0]) for f in t.lam])
        out["census"].append(int(np.count_nonzero(roots.real > 0)))
        lam2 = complex(t.lam[fam_of_slot[1]][0])
        out["re_lam2"].append(lam2.real)
        if params.case_id == Case.CASE5:
            ref = case5_lambda2_refined(params, setup)
            out["lam2_refined_relerr"].append(abs(lam2 - ref) / abs(lam2))
    out["runtime"] = time.perf_counter() - t0
    return out


def field_sweep(params: RegimeParams, eps_values=None, n=None):
    """Packet sizes, incident norms, interior-defect norms, and wall reports
    across eps.  Packet sizes use the three-layer matching amplitudes; wall
    reports use the lift amplitudes of the assembled solution."""
    from .packets import DEFAULT_NODES_PER_LOBE

    eps_values = FIELD_EPS if eps_values is None else np.asarray(eps_values, float)
    n = DEFAULT_NODES_PER_LOBE if n is None else int(n)
    names = [name for name, _ in packet_layout(params)]
    out = {
        "eps": eps_values,
        "packet_linf": {nm: [] for nm in names},
        "packet_l2": {nm: [] for nm in names},
        "incident_linf": [],
        "incident_l2": [],
        "residual_l2": [],
        "residual_nu_l2": [],
        "residual_kappa_l2": [],
        "wall": [],
    }
    for e in eps_values:
        e = float(e)
        setup = critical_wavenumber(params, e)
        spec = WavePacketSpec.from_setup(setup, n=n)
        pkts, tables = boundary_layer_packets(params, setup, spec, amplitudes="matching")
        for pk in pkts:
            l2v, _ = l2_norm(pk)
            out["packet_l2"][pk.name].append(l2v)
            out["packet_linf"][pk.name].append(linf_norm(pk, e, k0=setup.k0))
        inc = incident_packet(params, setup, spec)
        il2, ilinf = norms(inc, e, k0=setup.k0)
        out["incident_l2"].append(il2)
        out["incident_linf"].append(ilinf)
        rp = residual_packet(params, setup, spec)
        _, per = l2_norm(rp, y_trunc=30.0 / e**2, components=(0, 1, 2))
        out["residual_l2"].append(float(np.sqrt(np.sum(per**2))))
        out["residual_nu_l2"].append(float(np.hypot(per[0], per[1])))
        out["residual_kappa_l2"].append(float(per[2]))
        out["wall"].append(boundary_residual(params, setup, spec, tables=tables))
    return out


def _fit_rows(case, beta, table, eps, series, tol, note=""):
    fit = fit_exponent(list(zip(eps, series["values"])))
    status = _status(series["predicted"], fit.slope, tol)
    return ReportRow(
        case=case, beta=beta, table=table, label=series["label"],
        predicted=series["predicted"], fitted=fit.slope, tol=tol, r2=fit.r2,
        status=status, note=note,
    )


def case_report(params: RegimeParams, scalar_eps=None, field_eps=None, n=None,
                with_fields=True):
    """All verification rows (and the raw sweep samples) for one regime."""
    pred = predictions(params)
    case, beta = int(params.case_id), params.beta
    rows = []
    sc = scalar_sweep(params, scalar_eps)
    eps_s = sc["eps"]

    # root census: exactly three decaying layers in the regular regimes, and
    # (with a strictly positive but possibly tiny rate) in the degenerate one
    census_ok = all(c == 3 for c in sc["census"])
    rows.append(ReportRow(case, beta, "roots", "census_re_pos", 3.0,
                          float(np.median(sc["census"])), 0.0, 1.0,
                          "PASS" if census_ok else "FAIL",
                          note="three decaying layers at every swept eps"))

    for name in _SLOT_NAMES:
        fit = fit_exponent(list(zip(eps_s, sc["lam"][name])))
        rows.append(ReportRow(case, beta, "roots", f"q_{name}", pred.root_q[name],
                              fit.slope, TOL_ROOT_Q, fit.r2,
                              _status(pred.root_q[name], fit.slope, TOL_ROOT_Q)))

    if params.case_id == Case.CASE5:
        fit = fit_exponent(list(zip(eps_s, sc["re_lam2"])))
        rows.append(ReportRow(case, beta, "roots", "re_lam2", pred.re_lam2_exponent,
                              fit.slope, TOL_RE_LAM2, fit.r2,
                              _status(pred.re_lam2_exponent, fit.slope, TOL_RE_LAM2)))
        rfit = fit_exponent(list(zip(eps_s, sc["lam2_refined_relerr"])))
        rows.append(ReportRow(case, beta, "roots", "lam2_expansion_order", 0.0,
                              rfit.slope, 0.0, rfit.r2,
                              "PASS" if rfit.slope > 0 else "FAIL",
                              note="relative error of the three-term slow-root expansion"))

    fit = fit_exponent(list(zip(eps_s, sc["b5"])))
    rows.append(ReportRow(case, beta, "modes", "b5_prandtl", pred.b5_exponent,
                          fit.slope, TOL_AMP, fit.r2,
                          _status(pred.b5_exponent, fit.slope, TOL_AMP)))
    fit = fit_exponent(list(zip(eps_s, sc["det"])))
    rows.append(ReportRow(case, beta, "modes", "det", pred.det_exponent,
                          fit.slope, TOL_DET, fit.r2,
                          _status(pred.det_exponent, fit.slope, TOL_DET)))
    for name in ("bl2", "bl3", "bl5"):
        fit = fit_exponent(list(zip(eps_s, sc["a"][name])))
        rows.append(ReportRow(case, beta, "modes", f"amp_{name}", pred.amp_exponents[name],
                              fit.slope, TOL_AMP, fit.r2,
                              _status(pred.amp_exponents[name], fit.slope, TOL_AMP)))

    samples = {"scalar": sc}
    if not with_fields:
        return rows, samples

    fs = field_sweep(params, field_eps, n=n)
    eps_f = fs["eps"]
    samples["field"] = fs

    for pp in pred.packets:
        for norm_name, key, pub, corr in (
            ("linf", "packet_linf", pp.linf_published, pp.linf_corrected),
            ("l2", "packet_l2", pp.l2_published, pp.l2_corrected),
        ):
            fit = fit_exponent(list(zip(eps_f, fs[key][pp.name])))
            if not pp.in_tables:
                rows.append(ReportRow(case, beta, "sizes", f"{pp.name}_{norm_name}", corr,
                                      fit.slope, TOL_SIZE, fit.r2, "INFO",
                                      note="not part of the published size tables"))
                continue
            if pp.published_defect:
                ok_corr = abs(fit.slope - corr) <= TOL_SIZE
                rows.append(ReportRow(
                    case, beta, "sizes", f"{pp.name}_{norm_name}", pub, fit.slope,
                    TOL_SIZE, fit.r2, "KNOWN-DEFECT" if ok_corr else "FAIL",
                    note=f"published table omits the unbounded buoyancy factor; "
                         f"corrected prediction {corr:+.4g}",
                ))
            else:
                rows.append(ReportRow(case, beta, "sizes", f"{pp.name}_{norm_name}", pub,
                                      fit.slope, TOL_SIZE, fit.r2,
                                      _status(pub, fit.slope, TOL_SIZE)))

        # one-constant envelope bounds: measured <= K eps^theta with the
        # sup-constant K; the slope test carries the asymptotic content
        if pp.decay_exponent > 0:
            for norm_name, key, theta in (
                ("linf", "packet_linf", pp.alpha_eff + 2),
                ("l2", "packet_l2", (2 + pp.decay_exponent + 2 * pp.alpha_eff) / 2),
            ):
                vals = np.asarray(fs[key][pp.name])
                ratios = vals / eps_f**theta
                ksup = float(ratios.max())
                fit = fit_exponent(list(zip(eps_f, vals)))
                ok = fit.slope >= theta - TOL_SIZE and np.all(vals <= ksup * eps_f**theta * (1 + 1e-12))
                rows.append(ReportRow(case, beta, "lemma", f"{pp.name}_{norm_name}_bound", theta,
                                      fit.slope, TOL_SIZE, fit.r2,
                                      "PASS" if ok else "FAIL",
                                      note=f"sup constant K = {ksup:.4g}"))

    fit = fit_exponent(list(zip(eps_f, fs["incident_l2"])))
    rows.append(ReportRow(case, beta, "sizes", "incident_l2", pred.incident_l2_exponent,
                          fit.slope, TOL_INC, fit.r2,
                          _status(pred.incident_l2_exponent, fit.slope, TOL_INC)))
    fit = fit_exponent(list(zip(eps_f, fs["incident_linf"])))
    ok_corr = abs(fit.slope - pred.incident_linf_corrected) <= TOL_INC
    rows.append(ReportRow(
        case, beta, "sizes", "incident_linf", pred.incident_linf_published, fit.slope,
        TOL_INC, fit.r2, "KNOWN-DEFECT" if ok_corr else "FAIL",
        note=f"published O(1) is an upper bound only; the envelope mass makes the "
             f"pointwise size eps^2 (corrected prediction {pred.incident_linf_corrected:+g})",
    ))

    for label, key, p in (
        ("residual_l2", "residual_l2", pred.residual_exponent),
        ("residual_nu", "residual_nu_l2", pred.residual_nu_exponent),
        ("residual_kappa", "residual_kappa_l2", pred.residual_kappa_exponent),
    ):
        fit = fit_exponent(list(zip(eps_f, fs[key])))
        rows.append(ReportRow(case, beta, "consistency", label, p, fit.slope,
                              TOL_RESID, fit.r2, _status(p, fit.slope, TOL_RESID)))

    degenerate = params.case_id == Case.CASE5 and params.beta >= 8
    worst_uw = max(max(w.ratios[0], w.ratios[1]) for w in fs["wall"])
    rows.append(ReportRow(case, beta, "boundary", "lift_uw_ratio", 0.0, worst_uw,
                          WALL_LIFT_RTOL, 1.0,
                          "PASS" if worst_uw <= WALL_LIFT_RTOL else "FAIL",
                          note="sup wall residual of (u, w) over trace scale"))
    worst_b = max(w.ratios[2] for w in fs["wall"])
    if degenerate:
        rows.append(ReportRow(case, beta, "boundary", "dyb_residual", 0.0, worst_b,
                              0.0, 1.0, "PASS" if worst_b > 1e-6 else "FAIL",
                              note="degenerate regime: the d_y b condition is not lifted; "
                                   "a nonzero reported residual is the expected outcome"))
    else:
        rows.append(ReportRow(case, beta, "boundary", "lift_dyb_ratio", 0.0, worst_b,
                              WALL_LIFT_RTOL, 1.0,
                              "PASS" if worst_b <= WALL_LIFT_RTOL else "FAIL"))
    return rows, samples


def matrix_report(matrix=DEFAULT_MATRIX, gamma=math.pi / 6, nu0=1.0, kappa0=1.0,
                  scalar_eps=None, field_eps=None, n=None, with_fields=True,
                  report_hook=None):
    """Verification rows for every (case, beta) pair of the matrix (serial)."""
    rows = []
    all_samples = {}
    for case, beta in matrix:
        params = RegimeParams(gamma=gamma, case_id=Case(case), beta=float(beta),
                              nu0=nu0, kappa0=kappa0)
        r, samples = case_report(params, scalar_eps=scalar_eps, field_eps=field_eps,
                                 n=n, with_fields=with_fields)
        rows.extend(r)
        all_samples[(int(case), float(beta))] = samples
        if report_hook is not None:
            report_hook(int(case), float(beta), r)
    return rows, all_samples


def gate(rows, strict=False):
    """Exit-style verdict over report rows.

    Rows marked KNOWN-DEFECT (published table entries that a faithful
    measurement contradicts; the corrected predictions match) only fail the
    gate in strict mode.
    """
    failing = [r for r in rows if r.status == "FAIL"]
    if strict:
        failing += [r for r in rows if r.status == "KNOWN-DEFECT"]
    return failing
