"""Numerical probes of the thin-rod limit on tensor-product grids.

Fields live on ``[0, L] x omega`` sampled at ``x1`` nodes times the
vertices of a section mesh and are interpolated by P1xP1 prisms. Gradients
are the scaled gradients ``(d1, d2/h, d3/h)`` of the prism interpolant at
cell centres. Integrals over cells use that one point.

The module provides the Griso splitting of a displacement into an
elementary rod motion and a remainder, the approximate strain relative to
a frame curve, recovery deformations built from a frame curve and
cross-section correctors, and the scaled energy ``h^-2 int W(grad_h y)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .cross_section import TriMesh2D
from .effective_stiffness import EffectiveStiffness, effective_matrix
from .errors import InvalidParameterError
from .fem2d import mass_matrix
from .material import NonlinearLaw
from .rod_model import FrameCurve, StrainCurve, frame_reconstruct, strain_of
from .so3 import AXL_TO_COORDS, hat, polar_rotation, quat_mul, quat_to_matrix, rotvec_to_quat

log = logging.getLogger(__name__)

DEFAULT_LADDER = (0.2, 0.1, 0.05)


# ---------------------------------------------------------------- grid fields

@dataclass(frozen=True, eq=False)
class Displacement3D:
    """Vector field on the tensor grid, ``values[s, v]`` at ``(x1[s], vertex v)``."""

    mesh: TriMesh2D
    x1: np.ndarray
    values: np.ndarray
    h: float

    def __post_init__(self):
        x1 = np.asarray(self.x1, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if x1.ndim != 1 or len(x1) < 2 or np.any(np.diff(x1) <= 0):
            raise InvalidParameterError("x1 nodes must be strictly increasing, at least two")
        if vals.shape != (len(x1), self.mesh.n_vertices, 3):
            raise InvalidParameterError(
                f"values must have shape ({len(x1)}, {self.mesh.n_vertices}, 3), got {vals.shape}")
        if not 0 < self.h <= 1:
            raise InvalidParameterError(f"h must lie in (0, 1], got {self.h}")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "h", float(self.h))

    @property
    def n_cells(self):
        return (len(self.x1) - 1) * self.mesh.n_triangles

    @property
    def n_unknowns(self):
        return self.values.size

    def with_values(self, values):
        return Displacement3D(self.mesh, self.x1, values, self.h)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def cell_volumes(self):
        """``(n1, nt)`` prism volumes."""
        return np.diff(self.x1)[:, None] * self.mesh.areas[None, :]

    def cell_centres(self):
        """``(n1, nt, 3)`` centre coordinates ``(x1, x2, x3)``."""
        xm = 0.5 * (self.x1[1:] + self.x1[:-1])
        c = self.mesh.centroids
        out = np.empty((len(xm), len(c), 3))
        out[..., 0] = xm[:, None]
        out[..., 1:] = c[None]
        return out

    def cell_values(self):
        """Prism-centre values, ``(n1, nt, 3)``."""
        tri = self.mesh.triangles
        mid = 0.5 * (self.values[1:] + self.values[:-1])
        return mid[:, tri].mean(axis=2)

    def gradient(self, bary=None):
        """Scaled gradients ``(d1 | d2/h | d3/h)`` at the ``x1`` midpoint of each cell.

        ``bary`` selects the in-plane point by barycentric weights (default:
        the centroid); result shape ``(n1, nt, 3, 3)``.
        """
        tri = self.mesh.triangles
        _, grads = self.mesh.gradients()
        dx = np.diff(self.x1)
        b = np.full(3, 1.0 / 3.0) if bary is None else np.asarray(bary, dtype=float)
        d1 = np.einsum("a,stai->sti", b, (self.values[1:] - self.values[:-1])[:, tri]) / dx[:, None, None]
        mid = 0.5 * (self.values[1:] + self.values[:-1])[:, tri]   # (n1, nt, 3a, 3i)
        dx2 = np.einsum("tad,stai->stid", grads, mid)
        G = np.empty(d1.shape + (3,))
        G[..., 0] = d1
        G[..., 1:] = dx2 / self.h
        return G

    def l2_norm(self, cell_field):
        """``L2`` norm over the prism of a per-cell field."""
        vol = self.cell_volumes()
        f = np.asarray(cell_field, dtype=float).reshape(vol.shape + (-1,))
        return float(math.sqrt(np.sum(vol[..., None] * f**2)))


def reference_map(mesh: TriMesh2D, x1, h: float) -> Displacement3D:
    """The rest deformation ``(x1, h x2, h x3)``."""
    x1 = np.asarray(x1, dtype=float)
    v = mesh.vertices
    vals = np.empty((len(x1), len(v), 3))
    vals[..., 0] = x1[:, None]
    vals[..., 1] = h * v[None, :, 0]
    vals[..., 2] = h * v[None, :, 1]
    return Displacement3D(mesh, x1, vals, h)


def _sym(G):
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def _trapz_cumulative(f, x):
    """Cumulative trapezoid integral along axis 0, starting at zero."""
    dx = np.diff(x).reshape((-1,) + (1,) * (f.ndim - 1))
    inc = 0.5 * dx * (f[1:] + f[:-1])
    return np.concatenate([np.zeros((1,) + f.shape[1:]), np.cumsum(inc, axis=0)])


def random_displacement(mesh: TriMesh2D, x1, h: float, rng, scales=None) -> Displacement3D:
    """Random smooth field: rigid motion, rod-type bending and twist, smooth bulk part.

    ``scales`` weights the (rod, twist, bulk) parts; by default they are
    drawn uniformly from ``[0, 2)``. Used to sweep and test the Griso
    estimates.
    """
    x1 = np.asarray(x1, dtype=float)
    x2, x3 = mesh.vertices[:, 0], mesh.vertices[:, 1]
    t = (x1 / x1[-1])[:, None]

    def profile():
        c = rng.normal(size=4)
        return sum(ck * np.sin((k + 1) * np.pi * t / 2 + rng.uniform(0, 6)) for k, ck in enumerate(c))

    s = rng.uniform(0, 2, 3) if scales is None else np.asarray(scales, dtype=float)
    phi1, phi2, w = profile(), profile(), profile()
    d1 = np.gradient(phi1[:, 0], x1)[:, None]
    d2 = np.gradient(phi2[:, 0], x1)[:, None]
    u = np.zeros((len(x1), len(x2), 3))
    u[..., 0] += s[0] * (-d1 * x2 - d2 * x3)
    u[..., 1] += s[0] * phi1 / h + s[1] * w * x3
    u[..., 2] += s[0] * phi2 / h - s[1] * w * x2
    for i in range(3):
        c = rng.normal(size=(3, 3, 3)) * s[2]
        u[..., i] += sum(c[a, b, e] * t**a * x2**b * x3**e
                         for a in range(3) for b in range(3) for e in range(3) if a + b + e <= 3)
    pos = np.stack(np.broadcast_arrays(x1[:, None], h * x2[None], h * x3[None]), -1)
    u += rng.normal(size=3) + pos @ hat(rng.normal(size=3)).T
    return Displacement3D(mesh, x1, u, h)


# ---------------------------------------------------------------- Griso splitting

@dataclass(frozen=True, eq=False)
class GrisoParts:
    """Elementary rod motion plus remainder of a displacement.

    ``u = a + B (x1, h x2, h x3) + (-phi1' x2 - phi2' x3, phi1/h + w x3, phi2/h - w x2) + z``.
    """

    a: np.ndarray
    B: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    dphi1: np.ndarray
    dphi2: np.ndarray
    w: np.ndarray
    z: Displacement3D
    U: np.ndarray
    R: np.ndarray

    def elementary(self):
        """Field of everything except ``z``, on the grid of ``z``."""
        z = self.z
        h = z.h
        x1 = z.x1[:, None]
        x2 = z.mesh.vertices[None, :, 0]
        x3 = z.mesh.vertices[None, :, 1]
        pos = np.stack(np.broadcast_arrays(x1, h * x2, h * x3), axis=-1)
        out = self.a + pos @ self.B.T
        out[..., 0] += -self.dphi1[:, None] * x2 - self.dphi2[:, None] * x3
        out[..., 1] += self.phi1[:, None] / h + self.w[:, None] * x3
        out[..., 2] += self.phi2[:, None] / h - self.w[:, None] * x2
        return out

    def reconstruct(self):
        return self.z.with_values(self.elementary() + self.z.values)


def griso_decompose(u: Displacement3D) -> GrisoParts:
    """Split ``u`` with slice averages and first moments.

    ``U`` is the slice mean, and ``R`` collects the first moments::

        R1 = int(x2 u3 - x3 u2) / (h (mu2 + mu3)),
        R2 = int x3 u1 / (h mu3),   R3 = -int x2 u1 / (h mu2).

    The mesh must be in centred principal axes.
    """
    mesh, h, x1 = u.mesh, u.h, u.x1
    M = mass_matrix(mesh)
    x2, x3 = mesh.vertices[:, 0], mesh.vertices[:, 1]
    w2, w3 = M @ x2, M @ x3
    w1 = np.asarray(M.sum(axis=1)).ravel()
    area = w1.sum()
    mu2, mu3 = x2 @ w2, x3 @ w3
    vals = u.values
    U = np.einsum("v,svi->si", w1, vals) / area
    R = np.empty((len(x1), 3))
    R[:, 0] = (np.einsum("v,sv->s", w2, vals[..., 2]) - np.einsum("v,sv->s", w3, vals[..., 1])) / (h * (mu2 + mu3))
    R[:, 1] = np.einsum("v,sv->s", w3, vals[..., 0]) / (h * mu3)
    R[:, 2] = -np.einsum("v,sv->s", w2, vals[..., 0]) / (h * mu2)

    a = U[0].copy()
    B = hat(R[0])
    intR = _trapz_cumulative(R, x1)
    phi1 = h * (intR[:, 2] - x1 * R[0, 2])
    phi2 = h * (-intR[:, 1] + x1 * R[0, 1])
    dphi1 = h * (R[:, 2] - R[0, 2])
    dphi2 = h * (-R[:, 1] + R[0, 1])
    w = -h * (R[:, 0] - R[0, 0])

    # remainder: Griso's z = U - U(0) -+ int R + ubar, with ubar = u - U_e
    pos_h = np.stack([np.zeros_like(x2), h * x2, h * x3], axis=-1)
    Ue = U[:, None, :] + np.cross(R[:, None, :], pos_h[None, :, :])
    ubar = vals - Ue
    z = np.empty_like(vals)
    z[..., 0] = (U[:, 0] - U[0, 0])[:, None] + ubar[..., 0]
    z[..., 1] = (U[:, 1] - U[0, 1] - intR[:, 2])[:, None] + ubar[..., 1]
    z[..., 2] = (U[:, 2] - U[0, 2] + intR[:, 1])[:, None] + ubar[..., 2]
    return GrisoParts(a, B, phi1, phi2, dphi1, dphi2, w, u.with_values(z), U, R)


def griso_residual(u: Displacement3D, parts: GrisoParts | None = None) -> float:
    """Max node-wise reconstruction error relative to ``max |u|`` (or 1)."""
    parts = parts or griso_decompose(u)
    err = np.abs(parts.reconstruct().values - u.values).max()
    return float(err / max(1.0, np.abs(u.values).max()))


def _w_norm(f, x1, order):
    """Discrete ``W^{order,2}`` norm of nodal values (trapezoid plus difference quotients)."""
    tot = float(np.sum(0.5 * np.diff(x1) * (f[1:] ** 2 + f[:-1] ** 2)))
    d = f
    for _ in range(order):
        d = np.diff(d) / np.diff(x1[: len(d)])
        tot += float(np.sum(np.diff(x1)[: len(d)] * d**2))
    return math.sqrt(tot)


@dataclass(frozen=True)
class GrisoNorms:
    rod_parts: float      # |phi1|_W2 + |phi2|_W2 + |w|_W1
    remainder: float      # |z|_L2 + |grad_h z|_L2
    sym_strain: float     # |sym grad_h u|_L2

    def ratios(self):
        s = self.sym_strain
        if s == 0:
            return (0.0 if self.rod_parts == 0 else math.inf,
                    0.0 if self.remainder == 0 else math.inf)
        return self.rod_parts / s, self.remainder / s


def griso_norms(u: Displacement3D, parts: GrisoParts | None = None) -> GrisoNorms:
    """Both sides of the two Griso estimates in discrete ``L2``-based norms.

    ``phi'`` is exact (``h (R3 - R3(0))`` and ``-h (R2 - R2(0))``); second
    derivatives and ``w'`` are difference quotients.
    """
    p = parts or griso_decompose(u)
    x1 = u.x1
    n_phi = 0.0
    for phi, dphi in ((p.phi1, p.dphi1), (p.phi2, p.dphi2)):
        sq = _w_norm(phi, x1, 0) ** 2 + _w_norm(dphi, x1, 1) ** 2
        n_phi += math.sqrt(sq)
    rod = n_phi + _w_norm(p.w, x1, 1)
    rem = p.z.l2_norm(p.z.cell_values()) + p.z.l2_norm(p.z.gradient())
    sym = u.l2_norm(_sym(u.gradient()))
    return GrisoNorms(rod, rem, sym)


# ---------------------------------------------------------------- strain and energy

def midpoint_frames(frame: FrameCurve):
    """Geodesic midpoints of consecutive frame nodes, ``(N, 3, 3)``."""
    k = strain_of(frame).axial * frame.spacing
    q = quat_mul(frame.quaternions[:-1], rotvec_to_quat(0.5 * k))
    return quat_to_matrix(q)


def approximate_strain(y: Displacement3D, Rh) -> np.ndarray:
    """``(Rh^T grad_h y - I) / h`` per cell, ``(n1, nt, 3, 3)``.

    ``Rh`` is a frame curve on the same ``x1`` nodes (evaluated at interval
    midpoints) or an array of per-interval rotations ``(n1, 3, 3)``.
    """
    n1 = len(y.x1) - 1
    if isinstance(Rh, FrameCurve):
        if Rh.N != n1:
            raise InvalidParameterError(f"frame has {Rh.N} intervals, grid has {n1}")
        Rm = midpoint_frames(Rh)
    else:
        Rm = np.asarray(Rh, dtype=float)
        if Rm.shape == (3, 3):
            Rm = np.broadcast_to(Rm, (n1, 3, 3))
        if Rm.shape != (n1, 3, 3):
            raise InvalidParameterError(f"rotations must have shape ({n1}, 3, 3), got {Rm.shape}")
    F = y.gradient()
    return (np.einsum("sji,stjk->stik", Rm, F) - np.eye(3)) / y.h


@dataclass(frozen=True)
class ProbeEnergy:
    value: float
    inverted_cells: int
    min_det: float


# interior section points, exact for quadratics on each triangle
SECTION_RULE = (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
                np.full(3, 1.0 / 3.0))
CENTROID_RULE = (np.full((1, 3), 1.0 / 3.0), np.ones(1))


def probe_energy(y: Displacement3D, law: NonlinearLaw, h: float | None = None,
                 rule: str = "section") -> ProbeEnergy:
    """``h^-2 int W(x, grad_h y)`` by per-cell quadrature.

    ``rule="centroid"`` uses one point per prism. ``rule="section"`` (the
    default) uses the three interior points of each triangle at the ``x1``
    midpoint, which integrates the linear-in-section strains of bending
    exactly at the quadratic level. A cell counts as inverted when
    ``det grad_h y <= 0`` at any of its points; the energy is still returned.
    """
    h = y.h if h is None else float(h)
    pts, wts = {"section": SECTION_RULE, "centroid": CENTROID_RULE}[rule]
    vol = y.cell_volumes().reshape(-1)
    xm = 0.5 * (y.x1[1:] + y.x1[:-1])
    P = y.mesh.vertices[y.mesh.triangles]                     # (nt, 3, 2)
    lame = getattr(law, "lame", None)
    total = 0.0
    bad = np.zeros(vol.shape, dtype=bool)
    min_det = math.inf
    for b, wq in zip(pts, wts):
        F = np.ascontiguousarray(y.gradient(b).reshape(-1, 3, 3))
        xs = b @ P                                            # (nt, 2)
        xc = np.empty((len(xm), len(xs), 3))
        xc[..., 0] = xm[:, None]
        xc[..., 1:] = xs[None]
        xc = xc.reshape(-1, 3)
        if lame is not None:
            mu, lam = lame(xc)
            mu = np.ascontiguousarray(mu, dtype=float)
            W, det = kernels.iso_energy_density(F, mu, np.ascontiguousarray(lam, dtype=float), 2.0 * mu)
        else:
            W = law(xc, F)
            det = np.linalg.det(F)
        total += wq * float(np.sum(vol * W))
        bad |= det <= 0
        min_det = min(min_det, float(det.min()))
    n_bad = int(bad.sum())
    if n_bad:
        log.warning("%d inverted cells in probe energy", n_bad)
    return ProbeEnergy(total / h**2, n_bad, min_det)


def rigidity_diagnostic(y: Displacement3D):
    """Slice-wise best-fit rotations and the distances they control.

    Returns ``(Rh, dist, gap)`` with ``Rh`` the polar factor of the
    slice-averaged ``grad_h y`` per interval, ``dist`` the ``L2`` norm of
    ``dist(grad_h y, SO(3))`` and ``gap`` the ``L2`` norm of ``grad_h y - Rh``.
    """
    F = y.gradient()
    vol = y.cell_volumes()
    Fbar = np.einsum("st,stij->sij", vol, F) / vol.sum(axis=1)[:, None, None]
    Rh = polar_rotation(Fbar)
    gap = y.l2_norm(F - Rh[:, None])
    d = F - polar_rotation(F.reshape(-1, 3, 3)).reshape(F.shape)
    return Rh, y.l2_norm(d), gap


# ---------------------------------------------------------------- recovery

def _frame_integral(frame: FrameCurve):
    """Exact ``int_0^{x1} R e1`` at the nodes for piecewise-constant strain."""
    dt = frame.spacing
    k = strain_of(frame).axial
    th = np.linalg.norm(k, axis=1) * dt
    small = th < 1e-6
    ts = np.where(small, 1.0, th)
    c1 = np.where(small, 0.5 - th**2 / 24.0, (1.0 - np.cos(ts)) / ts**2)
    c2 = np.where(small, 1.0 / 6.0 - th**2 / 120.0, (ts - np.sin(ts)) / ts**3)
    K = hat(k * dt)
    Jint = dt * (np.eye(3) + c1[:, None, None] * K + c2[:, None, None] * (K @ K))
    R = frame.matrices
    inc = np.einsum("nij,njk,k->ni", R[:-1], Jint, np.array([1.0, 0.0, 0.0]))
    return np.concatenate([np.zeros((1, 3)), np.cumsum(inc, axis=0)])


def _node_average(per_interval):
    f = np.asarray(per_interval)
    out = np.empty((len(f) + 1,) + f.shape[1:])
    out[0], out[-1] = f[0], f[-1]
    out[1:-1] = 0.5 * (f[1:] + f[:-1])
    return out


def build_recovery(frame: FrameCurve, mesh: TriMesh2D, h: float, a=0.0,
                   stiffness: EffectiveStiffness | None = None,
                   vbar_corrections: bool = False) -> Displacement3D:
    """Recovery deformation for a frame curve, stretch profile and correctors.

    ::

        y = int R e1 + h x2 R e2 + h x3 R e3 + h R vbar + h int a R e1

    with ``A = R^T R'`` and ``vbar = h beta`` where ``beta`` superposes the
    unit correctors of ``stiffness`` (computed with ``keep_correctors=True``)
    with weights ``(a, A12, A13, A23)``. ``a`` is a scalar, nodal values or a
    callable of ``x1``.

    With ``vbar_corrections`` the terms
    ``-h^2 (x2 (A vbar)_2 - x3 (A vbar)_3) R e1 - h int (A vbar)_1 R e1``
    are added as well. For correctors that do not oscillate in ``x1`` the
    last one contributes an in-plane strain ``int_0^x1 d_alpha (A beta)_1``
    that does not vanish as ``h -> 0``, so it is off by default.
    """
    if not 0 < h <= 1:
        raise InvalidParameterError(f"h must lie in (0, 1], got {h}")
    x1 = frame.nodes
    n = len(x1)
    if callable(a):
        a_n = np.array([float(a(t)) for t in x1])
    else:
        a_n = np.broadcast_to(np.asarray(a, dtype=float), (n,)).copy()
    k_int = strain_of(frame).axial
    k_n = _node_average(k_int)
    Amat = hat(k_n)                                   # (n, 3, 3)
    R = frame.matrices
    x2 = mesh.vertices[:, 0]
    x3 = mesh.vertices[:, 1]
    nv = len(x2)

    if stiffness is not None and stiffness.correctors:
        if stiffness.correctors[0].values.shape[0] != nv:
            raise InvalidParameterError("correctors were computed on a different section mesh")
        betas = np.stack([c.values for c in stiffness.correctors])      # (4, nv, 3)
        coords = np.column_stack([a_n, k_n @ AXL_TO_COORDS.T])         # (n, 4)
        vbar = h * np.einsum("sk,kvi->svi", coords, betas)
    elif stiffness is not None:
        raise InvalidParameterError("stiffness carries no correctors; use keep_correctors=True")
    else:
        vbar = np.zeros((n, nv, 3))

    Av = np.einsum("sij,svj->svi", Amat, vbar)
    Re1, Re2, Re3 = R[:, :, 0], R[:, :, 1], R[:, :, 2]
    y = np.empty((n, nv, 3))
    y[:] = _frame_integral(frame)[:, None, :]
    y += h * x2[None, :, None] * Re2[:, None, :] + h * x3[None, :, None] * Re3[:, None, :]
    y += h * np.einsum("sij,svj->svi", R, vbar)
    integrand = np.broadcast_to(a_n[:, None, None] * Re1[:, None, :], (n, nv, 3))
    if vbar_corrections:
        y -= h**2 * (x2[None, :] * Av[..., 1] - x3[None, :] * Av[..., 2])[..., None] * Re1[:, None, :]
        integrand = integrand - Av[..., :1] * Re1[:, None, :]
    y += h * _trapz_cumulative(integrand, x1)
    return Displacement3D(mesh, x1, y, h)


def corrector_target(stiffness: EffectiveStiffness, y: Displacement3D, load_coords) -> np.ndarray:
    """``a e1 x e1 + sym iota(A d) + sym(0 | d2 beta | d3 beta)`` per cell."""
    c = np.asarray(load_coords, dtype=float)
    mesh = y.mesh
    cen = mesh.centroids
    a, A12, A13, A23 = c
    m = np.stack([a + A12 * cen[:, 0] + A13 * cen[:, 1], A23 * cen[:, 1], -A23 * cen[:, 0]], -1)
    T = np.zeros((mesh.n_triangles, 3, 3))
    T[:, :, 0] = m
    Eb = sum(ck * f.strain_matrices for ck, f in zip(c, stiffness.correctors))
    T = _sym(T + Eb)
    return np.broadcast_to(T, (len(y.x1) - 1,) + T.shape)


# ---------------------------------------------------------------- ladder report

@dataclass
class ProbeRung:
    h: float
    energy: float
    relative_gap: float
    inverted_cells: int
    rigidity_constant: float
    griso_residual: float
    unknowns: int


@dataclass
class ProbeReport:
    target: float
    rungs: list = field(default_factory=list)

    @property
    def gaps(self):
        return [r.relative_gap for r in self.rungs]

    @property
    def energies(self):
        return [r.energy for r in self.rungs]

    def as_dict(self):
        return {
            "target": self.target,
            "rungs": [r.__dict__.copy() for r in self.rungs],
        }


def gamma_probe(mesh: TriMesh2D, law: NonlinearLaw, strain_axial, h_ladder=DEFAULT_LADDER,
                length: float = 1.0, n_x1: int = 100, stiffness: EffectiveStiffness | None = None,
                max_unknowns: int = 1_000_000) -> ProbeReport:
    """Energy of recovery deformations for a constant strain along an ``h`` ladder.

    The stretch is set to ``a_min(A)``; the target is ``L Q0(A)``.
    """
    if stiffness is None or len(stiffness.correctors) != 4:
        stiffness = effective_matrix(mesh, law, keep_correctors=True)
    k = np.asarray(strain_axial, dtype=float)
    coords = k @ AXL_TO_COORDS.T
    target = length * stiffness.q0(coords)
    a = stiffness.a_min(coords)
    frame = frame_reconstruct(StrainCurve.constant(k, n_x1, length))
    report = ProbeReport(float(target))
    for h in h_ladder:
        y = build_recovery(frame, mesh, h, a, stiffness)
        if y.n_unknowns > max_unknowns:
            raise InvalidParameterError(f"probe grid has {y.n_unknowns} unknowns, limit {max_unknowns}")
        pe = probe_energy(y, law)
        _, _, gap = rigidity_diagnostic(y)
        u = y - reference_map(mesh, y.x1, h)
        gap_rel = (pe.value - target) / target if target else 0.0
        report.rungs.append(ProbeRung(float(h), float(pe.value), float(abs(gap_rel)), pe.inverted_cells,
                                      float(gap / h), griso_residual(u), int(y.n_unknowns)))
        log.info("probe h=%g energy=%.6e target=%.6e gap=%.3e", h, pe.value, target, gap_rel)
    return report
