"""Wave-packet synthesis: spectral envelopes, quadrature over the packet
lobes, and evaluation of incident / boundary-layer fields on physical grids.

A packet is a superposition over a compact spectral support

    W(x, y, t) = int A(k, m) c(k, m) exp(ikx - rho(k,m) y - i omega(k,m) t) dk dm,

where the envelope A concentrates on two square lobes of half-width eps^2
centered at +/-(k0, m0), c collects amplitude times eigenvector, and the
y-exponent rho is -i*m for free waves or an exact decay rate lam (Re > 0)
for boundary layers.  Quadrature is tensor Gauss-Legendre per lobe; the
integrand is smooth and compactly supported, so convergence is fast and is
validated by node doubling.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError
from .regime import CriticalSetup, RegimeParams, viscosity_diffusivity
from .modes import (
    ModeTable,
    incident_eigenvector,
    incident_pressure,
    eigenvector,
    mode_table,
    pointwise_frequency,
    pressure,
)
from .spectrum import RootFamily

#: Nodes per lobe per dimension.  48 integrates the bump envelope to ~3e-10
#: relative, comfortably inside the 1e-8 contract of the envelope identity.
DEFAULT_NODES_PER_LOBE = 48

#: Component order of every field array.
COMPONENTS = ("u", "w", "b", "p")


def bump_chi(s):
    """The standard smooth bump exp(1 - 1/(1-s^2)) on |s| < 1, chi(0) = 1."""
    arr = np.atleast_1d(np.asarray(s, float))
    out = np.zeros_like(arr)
    inside = np.abs(arr) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - arr[inside] ** 2))
    return out.reshape(np.shape(s)) if np.ndim(s) else float(out[0])


_CHI_FUNCS = {"bump": bump_chi}


@functools.lru_cache(maxsize=32)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n, a, b):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@functools.lru_cache(maxsize=8)
def chi_norms(chi_name="bump", n=400):
    """(||chi||_L1, ||chi^2||_L1) by high-order quadrature on [-1, 1]."""
    chi = _CHI_FUNCS[chi_name]
    x, w = gauss_legendre(n, -1.0, 1.0)
    v = chi(x)
    return float(np.sum(w * v)), float(np.sum(w * v * v))


@dataclass(frozen=True)
class WavePacketSpec:
    """Envelope profile and lobe quadrature of one packet family.

    The spectral envelope is
        A(k, m) = eps^-2 * sum_± chi(eps^-2 (k ± k0)) chi(eps^-2 (m ± m0)),
    supported on the two lobes sign*(k0, m0) + eps^2*[-1,1]^2.
    """

    k0: float
    m0: float
    eps: float
    n: int = DEFAULT_NODES_PER_LOBE
    chi_name: str = "bump"

    def __post_init__(self):
        if self.eps**2 >= min(abs(self.k0), abs(self.m0)):
            raise DomainError("packet lobes must not touch the k or m axis")
        if self.n < 4:
            raise DomainError("need at least 4 quadrature nodes per lobe")
        if self.chi_name not in _CHI_FUNCS:
            raise DomainError(f"unknown envelope profile {self.chi_name!r}")

    @property
    def chi(self):
        return _CHI_FUNCS[self.chi_name]

    def lobe_nodes(self, sign, n=None):
        """(k, wk, m, wm) Gauss-Legendre nodes of the lobe at sign*(k0, m0)."""
        n = self.n if n is None else n
        kc, mc = sign * self.k0, sign * self.m0
        k, wk = gauss_legendre(n, kc - self.eps**2, kc + self.eps**2)
        m, wm = gauss_legendre(n, mc - self.eps**2, mc + self.eps**2)
        return k, wk, m, wm

    @classmethod
    def from_setup(cls, setup: CriticalSetup, n=DEFAULT_NODES_PER_LOBE, chi_name="bump"):
        return cls(k0=setup.k0, m0=setup.m0, eps=setup.eps, n=n, chi_name=chi_name)


def envelope(spec: WavePacketSpec, k, m):
    """The spectral envelope A(k, m); zero outside the two lobes."""
    k = np.asarray(k, float)
    m = np.asarray(m, float)
    chi = spec.chi
    e2 = spec.eps**2
    total = np.zeros(np.broadcast(k, m).shape)
    for s in (+1.0, -1.0):
        total = total + chi((k + s * spec.k0) / e2) * chi((m + s * spec.m0) / e2)
    return total / e2


def envelope_l1(spec: WavePacketSpec, n=None):
    """Quadrature value of ||A||_L1 using the packet's own (or n-node) rule."""
    total = 0.0
    for s in (+1, -1):
        k, wk, m, wm = spec.lobe_nodes(s, n=n)
        K, M = np.meshgrid(k, m, indexing="ij")
        total += float(np.einsum("i,j,ij->", wk, wm, envelope(spec, K, M)))
    return total


# --------------------------------------------------------------------------
# spectral packet representation


@dataclass(frozen=True)
class LobeBranch:
    """One exponential branch on one lobe: field += sum wk wm coef e^{ikx - rho y - i omega t}."""

    rho: np.ndarray  # (nk, nm) complex y-exponent
    coef: np.ndarray  # (4, nk, nm) component coefficients (envelope included)


@dataclass(frozen=True)
class PacketLobe:
    k: np.ndarray
    wk: np.ndarray
    m: np.ndarray
    wm: np.ndarray
    omega: np.ndarray  # (nk, nm)
    branches: tuple


@dataclass(frozen=True)
class PacketSpectral:
    """A packet as quadrature-ready spectral data."""

    name: str
    lobes: tuple
    decaying: bool  # True when every branch has Re(rho) > 0 (boundary layer)

    def scaled(self, factors):
        """New packet with each component coefficient multiplied by factors (len 4)."""
        lobes = []
        for lb in self.lobes:
            branches = tuple(
                LobeBranch(rho=br.rho, coef=br.coef * np.asarray(factors, complex)[:, None, None])
                for br in lb.branches
            )
            lobes.append(PacketLobe(lb.k, lb.wk, lb.m, lb.wm, lb.omega, branches))
        return PacketSpectral(name=self.name, lobes=tuple(lobes), decaying=self.decaying)


@dataclass(frozen=True)
class Grid:
    """Evaluation grid; y >= 0 with the wall row y = 0 first when present."""

    x: np.ndarray
    y: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class FieldSample:
    """Complex (u, w, b, p) on a grid, shaped (len(x), len(y))."""

    grid: Grid
    u: np.ndarray
    w: np.ndarray
    b: np.ndarray
    p: np.ndarray
    provenance: tuple = ()

    def component(self, name):
        return getattr(self, name)

    @property
    def vector_linf(self):
        """max over grid and (u, w, b) of |component|."""
        return float(max(np.abs(self.u).max(), np.abs(self.w).max(), np.abs(self.b).max()))


def incident_packet(params: RegimeParams, setup: CriticalSetup, spec: WavePacketSpec):
    """Spectral data of the incident packet (u, w, b, p per node; rho = -i m)."""
    lobes = []
    for s in (+1, -1):
        k, wk, m, wm = spec.lobe_nodes(s)
        K, M = np.meshgrid(k, m, indexing="ij")
        A = envelope(spec, K, M)
        om = pointwise_frequency(K, M, params.gamma)
        u, w, b = incident_eigenvector(K, M, om, params.gamma)
        p = incident_pressure(K, M, om, params.gamma)
        coef = np.stack([A * u, A * w, A * b, A * p])
        lobes.append(
            PacketLobe(k=k, wk=wk, m=m, wm=wm, omega=om, branches=(LobeBranch(rho=-1j * M, coef=coef),))
        )
    return PacketSpectral(name="incident", lobes=tuple(lobes), decaying=False)


def residual_packet(params: RegimeParams, setup: CriticalSetup, spec: WavePacketSpec):
    """Spectral data of the interior defect of the assembled solution.

    The layers solve the dissipative system exactly, so the defect reduces to
    the dissipation acting on the free incident wave:
    (R_u, R_w, R_b) = (nu*(k^2+m^2) u, nu*(k^2+m^2) w, kappa*(k^2+m^2) b) per mode.
    """
    nu, kappa = viscosity_diffusivity(params, setup.eps)
    base = incident_packet(params, setup, spec)
    lobes = []
    for lb in base.lobes:
        K, M = np.meshgrid(lb.k, lb.m, indexing="ij")
        k2 = K**2 + M**2
        br = lb.branches[0]
        coef = np.stack([nu * k2 * br.coef[0], nu * k2 * br.coef[1], kappa * k2 * br.coef[2],
                         np.zeros_like(br.coef[3])])
        lobes.append(PacketLobe(lb.k, lb.wk, lb.m, lb.wm, lb.omega, (LobeBranch(br.rho, coef),)))
    return PacketSpectral(name="residual", lobes=tuple(lobes), decaying=False)


def _node_tables(params, setup, spec):
    """ModeTable per lobe on the tensor nodes, cached per (params, eps, n)."""
    tables = []
    for s in (+1, -1):
        k, wk, m, wm = spec.lobe_nodes(s)
        K, M = np.meshgrid(k, m, indexing="ij")
        t = mode_table(params, setup.eps, K.ravel(), M.ravel())
        tables.append((k, wk, m, wm, K, M, t))
    return tables


#: Packet grouping per regime: list of (packet name, families it contains).
def packet_layout(params: RegimeParams):
    if params.case_id.value == 5:
        bl2 = RootFamily.DEGENERATE if params.beta >= 8 else RootFamily.BL2
        return [("bl2", (bl2,)), ("bl3", (RootFamily.BL3,)), ("bl5", (RootFamily.BL5,))]
    return [("bl23", (RootFamily.BL2, RootFamily.BL3)), ("bl5", (RootFamily.BL5,))]


def boundary_layer_packets(params: RegimeParams, setup: CriticalSetup, spec: WavePacketSpec,
                           amplitudes="matching"):
    """Boundary-layer packets grouped by decay family.

    amplitudes: "matching" uses the full three-layer wall system (the packet
    amplitudes of the asymptotic tables); "lift" uses the amplitudes of the
    assembled solution, which differ only in the degenerate regime (the slow
    layer is dropped there and (u, w) are re-lifted with the fast pair).

    Returns (packets, tables) with tables the per-lobe ModeTable list.
    """
    if amplitudes not in ("matching", "lift"):
        raise DomainError(f"unknown amplitude policy {amplitudes!r}")
    nu, kappa = viscosity_diffusivity(params, setup.eps)
    tables = _node_tables(params, setup, spec)
    packets = {name: [] for name, _ in packet_layout(params)}
    for k, wk, m, wm, K, M, t in tables:
        A = envelope(spec, K, M)
        om = t.omega.reshape(K.shape)
        amps = t.a if amplitudes == "matching" else t.a_lift
        lobe_branches = {name: [] for name, _ in packet_layout(params)}
        for name, fams in packet_layout(params):
            for fam in fams:
                lam = t.lam[fam].reshape(K.shape)
                a = amps[fam].reshape(K.shape)
                U, W, B = eigenvector(K, lam, om, kappa, params.gamma)
                P = pressure(K, lam, om, nu, kappa, params.gamma)
                coef = np.stack([A * a * U, A * a * W, A * a * B, A * a * P])
                lobe_branches[name].append(LobeBranch(rho=lam, coef=coef))
        for name, _ in packet_layout(params):
            packets[name].append(
                PacketLobe(k=k, wk=wk, m=m, wm=wm, omega=om, branches=tuple(lobe_branches[name]))
            )
    out = [
        PacketSpectral(name=name, lobes=tuple(packets[name]), decaying=True)
        for name, _ in packet_layout(params)
    ]
    return out, [t for *_, t in tables]


def app_packets(params: RegimeParams, setup: CriticalSetup, spec: WavePacketSpec):
    """Incident plus lifting boundary-layer packets: the assembled solution."""
    bl, tables = boundary_layer_packets(params, setup, spec, amplitudes="lift")
    return [incident_packet(params, setup, spec)] + bl, tables


# --------------------------------------------------------------------------
# evaluation


def synth(packets, grid: Grid, derivative=(0, 0, 0)) -> FieldSample:
    """Evaluate (a sum of) packets on the grid, optionally differentiated.

    derivative = (ox, oy, ot) with each order <= 2; differentiation happens
    under the integral sign: d_x -> ik, d_y -> -rho, d_t -> -i*omega.
    """
    ox, oy, ot = derivative
    if max(ox, oy, ot) > 2 or min(ox, oy, ot) < 0:
        raise DomainError("derivative orders up to 2 are supported")
    if isinstance(packets, PacketSpectral):
        packets = [packets]
    x = np.asarray(grid.x, float)
    y = np.asarray(grid.y, float)
    fields = np.zeros((4, x.size, y.size), dtype=complex)
    for pk in packets:
        for lb in pk.lobes:
            phase_x = np.exp(1j * np.outer(lb.k, x))  # (nk, nx)
            if ox:
                phase_x = phase_x * (1j * lb.k[:, None]) ** ox
            tphase = np.exp(-1j * lb.omega * grid.t)
            if ot:
                tphase = tphase * (-1j * lb.omega) ** ot
            for br in lb.branches:
                decay = np.exp(-br.rho[..., None] * y[None, None, :])  # (nk, nm, ny)
                if oy:
                    decay = decay * (-br.rho[..., None]) ** oy
                wcoef = br.coef * (lb.wm[None, None, :] * tphase[None, :, :])
                g = np.einsum("cij,ijy->ciy", wcoef, decay)  # (4, nk, ny)
                fields += np.einsum("ciy,ix->cxy", g * lb.wk[None, :, None], phase_x)
    return FieldSample(
        grid=grid, u=fields[0], w=fields[1], b=fields[2], p=fields[3],
        provenance=tuple(pk.name for pk in packets),
    )


def synth_incident(params, setup, spec, grid, check_quadrature=False):
    """Incident packet fields on the grid (convenience wrapper)."""
    pk = incident_packet(params, setup, spec)
    if check_quadrature:
        verify_quadrature(params, setup, spec, grid)
    return synth(pk, grid)


def synth_boundary_layer(packet: PacketSpectral, grid: Grid):
    """Boundary-layer packet fields on the grid."""
    if not packet.decaying:
        raise DomainError("synth_boundary_layer expects a decaying packet")
    return synth(packet, grid)


def verify_quadrature(params, setup, spec, grid, rtol=1e-6, probe=4):
    """Richardson check: doubling the lobe nodes must not move the incident
    field by more than rtol (relative to the field scale) at probe points."""
    sub = Grid(x=np.asarray(grid.x)[:: max(1, len(grid.x) // probe)],
               y=np.asarray(grid.y)[:: max(1, len(grid.y) // probe)], t=grid.t)
    f1 = synth(incident_packet(params, setup, spec), sub)
    spec2 = WavePacketSpec(spec.k0, spec.m0, spec.eps, n=2 * spec.n, chi_name=spec.chi_name)
    f2 = synth(incident_packet(params, setup, spec2), sub)
    scale = max(np.abs(f2.u).max(), np.finfo(float).tiny)
    diff = max(np.abs(f1.u - f2.u).max(), np.abs(f1.w - f2.w).max(), np.abs(f1.b - f2.b).max())
    if diff > rtol * scale:
        raise AccuracyError(f"quadrature under-resolved: Richardson disagreement {diff/scale:.3g}")
    return diff / scale


def stretched_y_grid(min_decay, y_min, n=160, y_max=None, include_zero=True):
    """Geometric y grid resolving layers from y_min up to where the slowest
    layer has fallen below 1e-12 (or to y_max)."""
    if y_max is None:
        y_max = math.log(1e12) / max(min_decay, 1e-300)
    y_max = max(y_max, y_min * 10)
    g = np.geomspace(y_min, y_max, n - 1 if include_zero else n)
    return np.concatenate([[0.0], g]) if include_zero else g


def default_grid(params, setup, tables=None, nx=96, ny=160, x_periods=1.0, t=0.0,
                 include_incident_scale=False):
    """Wall-region grid: x spans x_periods carrier periods, y resolves every
    active layer (and optionally the incident envelope scale)."""
    x = np.linspace(0.0, x_periods * 2 * np.pi / abs(setup.k0), nx, endpoint=False)
    if tables:
        res = [lam.real.min() for t in tables for f, lam in t.lam.items()
               if f in (RootFamily.BL2, RootFamily.BL3, RootFamily.BL5, RootFamily.DEGENERATE)]
        min_decay = min(res)
        max_decay = max(lam.real.max() for t in tables for f, lam in t.lam.items()
                        if f in (RootFamily.BL2, RootFamily.BL3, RootFamily.BL5, RootFamily.DEGENERATE))
    else:
        min_decay, max_decay = 1.0, 1.0
    y_min = 0.02 / max_decay
    y_max = math.log(1e12) / max(min_decay, 1e-300)
    if include_incident_scale:
        y_max = max(y_max, 6.0 / setup.eps**2)
    y = stretched_y_grid(min_decay, y_min, n=ny, y_max=y_max)
    return Grid(x=x, y=y, t=t)
