"""Effective rod stiffness from cross-section corrector problems.

For a law that does not depend on ``x1`` the limit energy density is::

    Q(A, a) = min_beta  int_omega Q(x', sym(iota(a e1 + A d) + (0 | d2 beta | d3 beta)))

with ``d = (0, x2, x3)`` and ``iota`` placing a vector in the first column.
Loads are written in coordinates ``(a, A12, A13, A23)``; ``Q`` is the
quadratic form of a 4x4 matrix ``M`` in those coordinates, ``Q0`` its Schur
complement eliminating ``a``, and ``a_min = -M_aa^{-1} M_aA``.

:class:`ThinRodCell` solves the same minimization on a finite-thickness
prism ``[0, L] x omega`` with the scaled gradient ``(d1, d2/h, d3/h)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cross_section import TriMesh2D
from .errors import InvalidParameterError, SizeError
from .fem2d import DEFAULT_TOL, SparseSpd, solve_spd
from .material import NonlinearLaw, QuadraticLaw

log = logging.getLogger(__name__)

COORDS = ("a", "A12", "A13", "A23")

# interior 3-point rule, exact for quadratics; points avoid element edges so
# piecewise-constant laws with mesh-aligned interfaces are sampled unambiguously
_TRI_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_TRI_W = np.full(3, 1 / 3)


# ---------------------------------------------------------------- loads

@dataclass(frozen=True)
class StrainLoad:
    """Macroscopic strain: stretch ``a`` and skew ``A`` via its upper entries."""

    a: float = 0.0
    A12: float = 0.0
    A13: float = 0.0
    A23: float = 0.0

    @classmethod
    def from_coords(cls, c):
        c = np.asarray(c, dtype=float)
        if c.shape != (4,):
            raise InvalidParameterError(f"load coordinates must have length 4, got {c.shape}")
        return cls(*map(float, c))

    @classmethod
    def from_matrix(cls, A, a=0.0, tol=1e-10):
        A = np.asarray(A, dtype=float)
        if A.shape != (3, 3):
            raise InvalidParameterError(f"A must be 3x3, got {A.shape}")
        if np.abs(A + A.T).max() > tol * max(1.0, np.abs(A).max()):
            raise InvalidParameterError("A is not skew-symmetric")
        return cls(float(a), A[0, 1], A[0, 2], A[1, 2])

    @property
    def coords(self):
        return np.array([self.a, self.A12, self.A13, self.A23])

    @property
    def matrix(self):
        return skew_from_coords(self.coords[1:])

    def m(self, x2, x3):
        """``a e1 + A (0, x2, x3)`` at the given points, shape ``(..., 3)``."""
        x2, x3 = np.broadcast_arrays(np.asarray(x2, float), np.asarray(x3, float))
        return np.stack([self.a + self.A12 * x2 + self.A13 * x3,
                         self.A23 * x3, -self.A23 * x2], axis=-1)


def skew_from_coords(c):
    """Skew matrix from ``(A12, A13, A23)``."""
    A12, A13, A23 = np.asarray(c, dtype=float)
    return np.array([[0.0, A12, A13], [-A12, 0.0, A23], [-A13, -A23, 0.0]])


def coords_from_skew(A):
    A = np.asarray(A, dtype=float)
    return np.array([A[0, 1], A[0, 2], A[1, 2]])


def _skew_coords(A):
    """Accept a 3x3 skew matrix or its three coordinates."""
    A = np.asarray(A, dtype=float)
    if A.shape == (3, 3):
        return StrainLoad.from_matrix(A).coords[1:]
    if A.shape == (3,):
        return A
    raise InvalidParameterError(f"expected a 3x3 skew matrix or 3 coordinates, got shape {A.shape}")


def _unit_m(x2, x3):
    """``m`` of the four unit loads, shape ``(4, ..., 3)``."""
    z = np.zeros_like(x2)
    o = np.ones_like(x2)
    return np.stack([
        np.stack([o, z, z], -1),
        np.stack([x2, z, z], -1),
        np.stack([x3, z, z], -1),
        np.stack([z, x3, -x2], -1),
    ])


def _iota_vec(m):
    """Row-major ``vec`` of the matrix with ``m`` as first column."""
    out = np.zeros(m.shape[:-1] + (9,))
    out[..., 0] = m[..., 0]
    out[..., 3] = m[..., 1]
    out[..., 6] = m[..., 2]
    return out


def _as_quadratic(law):
    if isinstance(law, NonlinearLaw):
        return law.quadratic
    if isinstance(law, QuadraticLaw):
        return law
    raise InvalidParameterError(f"expected a material law, got {type(law).__name__}")


# ---------------------------------------------------------------- corrector

class CorrectorProblem:
    """Assembled cross-section corrector system for one mesh and law.

    Unknowns are P1 fields ``beta: omega -> R^3`` stored vertex-interleaved.
    The kernel (constants and the in-plane rotation ``(0, -x3, x2)``) is
    removed by deflation.
    """

    def __init__(self, mesh: TriMesh2D, law, tol: float = DEFAULT_TOL, check_x1: bool = True):
        self.mesh = mesh
        self.law = _as_quadratic(law)
        if check_x1:
            self.law.require_x1_independent()
        self.tol = tol
        areas, grads = mesh.gradients()
        self.areas = areas
        nt, nv = mesh.n_triangles, mesh.n_vertices
        tri = mesh.triangles

        # quadrature points (nt, 3, 2) and law tensors (nt, 3, 9, 9)
        pts = np.einsum("qa,tad->tqd", _TRI_BARY, mesh.vertices[tri])
        self.qpts = pts
        x3d = np.concatenate([np.zeros(pts.shape[:-1] + (1,)), pts], axis=-1)
        self.Lq = self.law.tensor(x3d.reshape(-1, 3)).reshape(nt, 3, 9, 9)
        self.wq = areas[:, None] * _TRI_W[None, :]
        Lbar = np.einsum("tq,tqij->tij", self.wq, self.Lq)

        # D maps beta to vec((0 | d2 beta | d3 beta)) per element
        t_idx = np.repeat(np.arange(nt), 18)
        i_idx = np.tile(np.repeat(np.arange(3), 6), nt)
        j_idx = np.tile(np.tile(np.repeat([1, 2], 3), 3), nt)
        a_idx = np.tile(np.tile(np.arange(3), 6), nt)
        rows = 9 * t_idx + 3 * i_idx + j_idx
        cols = 3 * tri[t_idx, a_idx] + i_idx
        vals = grads[t_idx, a_idx, j_idx - 1]
        self.D = sp.csr_matrix((vals, (rows, cols)), shape=(9 * nt, 3 * nv))
        Lblk = sp.bsr_matrix((Lbar, np.arange(nt), np.arange(nt + 1)), shape=(9 * nt, 9 * nt)).tocsr()
        K = (self.D.T @ Lblk @ self.D).tocsr()
        K = 0.5 * (K + K.T)

        x = mesh.vertices
        Z = np.zeros((4, 3 * nv))
        for i in range(3):
            Z[i, i::3] = 1.0
        Z[3, 1::3] = -x[:, 1]
        Z[3, 2::3] = x[:, 0]
        self.system = SparseSpd(K, Z)
        self._Zrot = Z[3] / np.linalg.norm(Z[3])

        # per-quadrature-point iota(m) of the four unit loads: (4, nt, 3, 9)
        self.unit_iota = _iota_vec(_unit_m(pts[..., 0], pts[..., 1]))
        self.residuals: dict[str, float] = {}

    def _source(self, iota):
        """Element data ``sum_q w_q L_q iota_q`` and the assembled rhs."""
        s = np.einsum("tq,tqij,tqj->ti", self.wq, self.Lq, iota)
        rhs = -(self.D.T @ s.reshape(-1))
        scale = float(np.linalg.norm(np.abs(self.D.T) @ np.abs(s.reshape(-1))))
        return rhs, scale

    def solve_coords(self, c, name="load"):
        """Corrector for load coordinates ``c``; returns ``(beta, iota_q)``."""
        c = np.asarray(c, dtype=float)
        iota = np.einsum("k,ktqi->tqi", c, self.unit_iota)
        if not np.any(c):
            return np.zeros(self.system.n), iota
        rhs, scale = self._source(iota)
        beta, info = solve_spd(self.system, rhs, tol=self.tol, return_info=True, rhs_scale=scale)
        self.residuals[name] = info.relative_residual
        return beta, iota

    def strains(self, beta, iota):
        """Total strain ``iota(m) + (0|d2 beta|d3 beta)`` per quadrature point, ``(nt, 3, 9)``."""
        E = (self.D @ beta).reshape(-1, 9)
        return iota + E[:, None, :]

    def energy_of(self, beta, iota):
        G = self.strains(beta, iota)
        return float(np.einsum("tq,tqi,tqij,tqj->", self.wq, G, self.Lq, G))

    def polarized(self, Ga, Gb):
        return float(np.einsum("tq,tqi,tqij,tqj->", self.wq, Ga, self.Lq, Gb))


@dataclass(frozen=True, eq=False)
class CorrectorField:
    """Minimizing ``beta`` (vertex values ``(nv, 3)``) and its strain data."""

    mesh: TriMesh2D
    load: StrainLoad
    values: np.ndarray
    element_strain: np.ndarray

    @property
    def strain_matrices(self):
        """Corrector strain ``(0 | d2 beta | d3 beta)`` per element, ``(nt, 3, 3)``."""
        return self.element_strain.reshape(-1, 3, 3)


def corrector_solve(mesh: TriMesh2D, law, load: StrainLoad, tol: float = DEFAULT_TOL,
                    problem: CorrectorProblem | None = None):
    """Minimize the cross-section energy for ``load``.

    Returns ``(field, energy)``; ``field.values`` is normalized to zero
    mean and no in-plane rotation.
    """
    prob = problem or CorrectorProblem(mesh, law, tol)
    if not isinstance(load, StrainLoad):
        load = StrainLoad.from_coords(load)
    beta, iota = prob.solve_coords(load.coords)
    energy = prob.energy_of(beta, iota)
    E = (prob.D @ beta).reshape(-1, 9)
    return CorrectorField(mesh, load, beta.reshape(-1, 3), E), energy


# ---------------------------------------------------------------- effective matrix

@dataclass(frozen=True, eq=False)
class EffectiveStiffness:
    """Limit quadratic forms in coordinates ``(a, A12, A13, A23)``."""

    M: np.ndarray
    Q0: np.ndarray
    a_min_coeffs: np.ndarray
    geometry: object = None
    solver_residuals: dict = field(default_factory=dict)
    mesh_stats: dict = field(default_factory=dict)
    correctors: tuple = ()

    @classmethod
    def from_matrix(cls, M, **kw):
        """Derive ``Q0`` and ``a_min`` from a symmetric positive definite ``M``."""
        M = np.array(M, dtype=float)
        if M.shape != (4, 4):
            raise InvalidParameterError(f"M must be 4x4, got {M.shape}")
        M = 0.5 * (M + M.T)
        Maa = M[0, 0]
        if not Maa > 0:
            raise InvalidParameterError("M_aa must be positive")
        MaA = M[0, 1:]
        Q0 = M[1:, 1:] - np.outer(MaA, MaA) / Maa
        return cls(M, 0.5 * (Q0 + Q0.T), -MaA / Maa, **kw)

    def q(self, A, a=0.0):
        """``Q(A, a)``."""
        c = np.concatenate([[float(a)], _skew_coords(A)])
        return float(c @ self.M @ c)

    def q0(self, A):
        c = _skew_coords(A)
        return float(c @ self.Q0 @ c)

    def a_min(self, A):
        return float(self.a_min_coeffs @ _skew_coords(A))

    def as_dict(self):
        geo = self.geometry
        out = {
            "M": self.M.ravel().tolist(),
            "Q0": self.Q0.ravel().tolist(),
            "a_min": self.a_min_coeffs.tolist(),
            "mu2": getattr(geo, "mu2", None),
            "mu3": getattr(geo, "mu3", None),
            "torsion_constant": getattr(geo, "torsion_constant", None),
            "mesh_stats": dict(self.mesh_stats),
            "solver_residuals": dict(self.solver_residuals),
        }
        return out


def q0_eval(stiff: EffectiveStiffness, A) -> float:
    """``Q0(A)`` for a skew matrix or coordinates ``(A12, A13, A23)``."""
    return stiff.q0(A)


def a_min_eval(stiff: EffectiveStiffness, A) -> float:
    """Optimal stretch ``a_min(A)``."""
    return stiff.a_min(A)


def effective_matrix(mesh: TriMesh2D, law, geometry=None, tol: float = DEFAULT_TOL,
                     keep_correctors: bool = False) -> EffectiveStiffness:
    """Assemble ``M`` from the four unit-load correctors by polarization."""
    prob = CorrectorProblem(mesh, law, tol)
    G = []
    fields = []
    for k, name in enumerate(COORDS):
        c = np.zeros(4)
        c[k] = 1.0
        beta, iota = prob.solve_coords(c, name)
        G.append(prob.strains(beta, iota))
        if keep_correctors:
            fields.append(CorrectorField(mesh, StrainLoad.from_coords(c), beta.reshape(-1, 3),
                                         (prob.D @ beta).reshape(-1, 9)))
    M = np.array([[prob.polarized(G[i], G[j]) for j in range(4)] for i in range(4)])
    return EffectiveStiffness.from_matrix(
        M, geometry=geometry, solver_residuals=dict(prob.residuals),
        mesh_stats=mesh.stats(), correctors=tuple(fields))


def superpose_correctors(stiff: EffectiveStiffness, load: StrainLoad):
    """Vertex corrector ``beta`` for ``load`` from stored unit correctors."""
    if len(stiff.correctors) != 4:
        raise InvalidParameterError("stiffness was computed without keep_correctors=True")
    c = load.coords
    return sum(ck * f.values for ck, f in zip(c, stiff.correctors))


# ---------------------------------------------------------------- finite thickness

MAX_DOFS = 400_000


class ThinRodCell:
    """Finite-thickness relaxation on ``[0, L] x omega``.

    Minimizes ``int Q(x, iota(m) + grad_h psi)`` over P1xP1 prism fields
    ``psi`` whose slice averages of ``(psi1, h psi2, h psi3)`` and first
    moment ``int x3 psi2`` vanish at every ``x1`` node. The KKT matrix is
    factorized once; :meth:`energy` then costs one back-substitution.
    """

    def __init__(self, mesh: TriMesh2D, law, h: float, length: float = 1.0,
                 n_x1: int | None = None, max_dofs: int = MAX_DOFS):
        if not 0 < h <= 1:
            raise InvalidParameterError(f"h must lie in (0, 1], got {h}")
        if not length > 0:
            raise InvalidParameterError(f"length must be positive, got {length}")
        self.mesh, self.h, self.length = mesh, float(h), float(length)
        self.law = _as_quadratic(law)
        n1 = int(n_x1) if n_x1 is not None else max(4, math.ceil(2.0 * length / h))
        self.n_x1 = n1
        nv, nt = mesh.n_vertices, mesh.n_triangles
        ndof = 3 * nv * (n1 + 1)
        if ndof > max_dofs:
            raise SizeError(f"{ndof} unknowns exceed the limit of {max_dofs}")
        self.ndof = ndof
        self.x1 = np.linspace(0.0, length, n1 + 1)
        dx = length / n1

        areas, grads = mesh.gradients()
        tri = mesh.triangles
        gp = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
        # reference prism: 6 nodes (a, b) with a in triangle, b in {0, 1}
        lam_q = _TRI_BARY                                 # (3q, 3a)
        ell = np.stack([1.0 - gp, gp], axis=1)            # (2g, 2b)
        dell = np.array([-1.0, 1.0]) / dx                 # (2b,)
        qpts2 = np.einsum("qa,tad->tqd", lam_q, mesh.vertices[tri])  # (nt, 3, 2)
        # gradient (d1, d2/h, d3/h) of node function (a, b) at (q, g)
        g = np.empty((nt, 3, 2, 3, 2, 3))
        g[..., 0] = lam_q[None, :, None, :, None] * dell[None, None, None, None, :]
        g[..., 1] = (grads[:, None, None, :, None, 0] * ell[None, None, :, None, :]) / h
        g[..., 2] = (grads[:, None, None, :, None, 1] * ell[None, None, :, None, :]) / h
        self._g = g
        w = areas[:, None, None] * _TRI_W[None, :, None] * (0.5 * dx)  # (nt, 3q, 2g)

        # element strains for psi_i at node (a, b): G[i, j] = g_j  -> vec index 3i + j
        ne = nt * n1
        e_t = np.tile(np.arange(nt), n1)
        e_s = np.repeat(np.arange(n1), nt)
        node = np.empty((ne, 3, 2), dtype=np.int64)
        for b in range(2):
            node[:, :, b] = (e_s + b)[:, None] * nv + tri[e_t]
        self._node = node

        xq = np.empty((ne, 3, 2, 3))
        xq[..., 0] = (self.x1[e_s][:, None, None] + dx * gp[None, None, :])
        xq[..., 1] = qpts2[e_t][:, :, None, 0]
        xq[..., 2] = qpts2[e_t][:, :, None, 1]
        self._xq = xq
        self._wq = w[e_t]
        Lq = self.law.tensor(xq.reshape(-1, 3)).reshape(ne, 3, 2, 9, 9)
        self._Lq = Lq

        # Bmat: (ne, q, g, 9, 18) mapping the 18 local dofs (a, b, i) to vec strain
        B = np.zeros((ne, 3, 2, 9, 3, 2, 3))
        ge = g[e_t]  # (ne, q, g, a, b, j)
        for i in range(3):
            for j in range(3):
                B[:, :, :, 3 * i + j, :, :, i] = ge[..., j]
        B = B.reshape(ne, 3, 2, 9, 18)
        self._B = B
        LB = np.matmul(Lq, B)
        self._LB = LB
        Ke = np.einsum("eqgki,eqgkj->eij", B * self._wq[..., None, None], LB, optimize=True)
        dofs = (3 * node[:, :, :, None] + np.arange(3)).reshape(ne, 18)
        self._dofs = dofs
        rows = np.repeat(dofs, 18, axis=1).ravel()
        cols = np.tile(dofs, (1, 18)).ravel()
        K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof))
        K = 0.5 * (K + K.T)

        # slice constraints
        mass_int = np.zeros(nv)
        np.add.at(mass_int, tri, areas[:, None] / 3.0)
        x3_int = np.zeros(nv)
        np.add.at(x3_int, tri, areas[:, None] * (mesh.vertices[tri][..., 1].sum(1)[:, None]
                                                 + mesh.vertices[tri][..., 1]) / 12.0)
        crow, ccol, cval = [], [], []
        for s in range(n1 + 1):
            base = 3 * (s * nv + np.arange(nv))
            for k, (comp, wts) in enumerate([(0, mass_int), (1, h * mass_int),
                                             (2, h * mass_int), (1, x3_int)]):
                crow.append(np.full(nv, 4 * s + k))
                ccol.append(base + comp)
                cval.append(wts)
        C = sp.csr_matrix((np.concatenate(cval), (np.concatenate(crow), np.concatenate(ccol))),
                          shape=(4 * (n1 + 1), ndof))
        self._C = C
        scale = abs(K).sum(axis=1).max()
        cs = scale / max(abs(C).max(), 1e-300)
        KKT = sp.bmat([[K, cs * C.T], [cs * C, None]], format="csc")
        self._K = K
        self._lu = spla.splu(KKT)
        self._unit = _iota_vec(_unit_m(xq[..., 1], xq[..., 2]))  # (4, ne, q, g, 9)
        log.debug("thin cell: h=%g, %d dofs, %d constraints", h, ndof, C.shape[0])

    def _solve(self, c):
        iota = np.einsum("k,keqgi->eqgi", c, self._unit)
        s = np.einsum("eqg,eqgki,eqgk->ei", self._wq, self._LB, iota, optimize=True)
        f = np.zeros(self.ndof)
        np.add.at(f, self._dofs, -s)
        rhs = np.concatenate([f, np.zeros(self._C.shape[0])])
        sol = self._lu.solve(rhs)
        psi = sol[: self.ndof]
        G = iota + np.matmul(self._B, psi[self._dofs][:, None, None, :, None])[..., 0]
        return psi, G

    def energy(self, load) -> float:
        """``K_h`` for ``load`` (a :class:`StrainLoad` or 4 coordinates)."""
        c = load.coords if isinstance(load, StrainLoad) else np.asarray(load, dtype=float)
        if not np.any(c):
            return 0.0
        _, G = self._solve(c)
        return self._quad(G, G)

    def _quad(self, Ga, Gb):
        LG = np.matmul(self._Lq, Gb[..., None])[..., 0]
        return float(np.einsum("eqg,eqgk,eqgk->", self._wq, Ga, LG, optimize=True))

    def matrix(self):
        """4x4 matrix of ``K_h`` in load coordinates, by polarization."""
        Gs = []
        for k in range(4):
            c = np.zeros(4)
            c[k] = 1.0
            Gs.append(self._solve(c)[1])
        return np.array([[self._quad(Gs[i], Gs[j]) for j in range(4)] for i in range(4)])

    def competitor_energy(self, beta, load) -> float:
        """Energy of ``psi = h beta(x')`` (no solve).

        Adding constants and the in-plane rotation to ``beta`` makes this
        field admissible without changing its energy, so the value bounds
        :meth:`energy` from above.
        """
        c = load.coords if isinstance(load, StrainLoad) else np.asarray(load, dtype=float)
        beta = np.asarray(beta, dtype=float).reshape(-1, 3)
        psi = np.tile(self.h * beta.ravel(), self.n_x1 + 1)
        iota = np.einsum("k,keqgi->eqgi", c, self._unit)
        G = iota + np.matmul(self._B, psi[self._dofs][:, None, None, :, None])[..., 0]
        return self._quad(G, G)


def finite_h_K(mesh: TriMesh2D, law, load, h: float, length: float = 1.0,
               n_x1: int | None = None, max_dofs: int = MAX_DOFS) -> float:
    """One-shot ``K_h(m, [0, L])``; build a :class:`ThinRodCell` to reuse factorizations."""
    return ThinRodCell(mesh, law, h, length, n_x1, max_dofs).energy(load)
