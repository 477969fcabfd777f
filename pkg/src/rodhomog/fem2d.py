"""Linear finite elements on a cross-section.

Holds the scalar Neumann machinery used to split a planar vector field
into a gradient part and its L2-orthogonal complement, the torsion
constant derived from that split, and a deflated conjugate-gradient
solver for symmetric positive semidefinite systems with a known kernel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ._backend import kernels
from .errors import ConsistencyError, ConvergenceError, InvalidParameterError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


class SolveInfo(NamedTuple):
    iterations: int
    residual: float
    relative_residual: float


@dataclass(frozen=True, eq=False)
class SparseSpd:
    """Symmetric positive semidefinite matrix with a declared null space.

    ``kernel_basis`` rows span the null space; they are orthonormalized
    on construction and checked against the matrix.
    """

    matrix: sp.csr_matrix
    kernel_basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    kernel_tol: float = 1e-10

    def __post_init__(self):
        M = sp.csr_matrix(self.matrix, dtype=np.float64)
        M.sort_indices()
        n = M.shape[0]
        if M.shape != (n, n):
            raise InvalidParameterError(f"matrix must be square, got {M.shape}")
        norm = abs(M).sum(axis=1).max() if M.nnz else 0.0
        asym = abs(M - M.T).max() if M.nnz else 0.0
        if asym > 1e-12 * max(norm, 1e-300):
            raise InvalidParameterError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})")
        Z = np.asarray(self.kernel_basis, dtype=float)
        if Z.size == 0:
            Z = np.zeros((0, n))
        Z = np.atleast_2d(Z)
        if Z.shape[1] != n:
            raise InvalidParameterError(f"kernel vectors must have length {n}")
        for v in Z:
            r = np.linalg.norm(M @ v, ord=np.inf)
            if r > self.kernel_tol * norm * np.linalg.norm(v, ord=np.inf):
                raise InvalidParameterError(f"declared kernel vector is not in the null space (|Mv| = {r:.3e})")
        if len(Z):
            Z = np.linalg.qr(Z.T)[0].T
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "kernel_basis", np.ascontiguousarray(Z))

    @property
    def n(self):
        return self.matrix.shape[0]


def solve_spd(system, rhs, tol=DEFAULT_TOL, maxiter=None, return_info=False, rhs_scale=None):
    """Solve ``M x = rhs`` with ``x`` orthogonal to the kernel of ``M``.

    Parameters
    ----------
    system : SparseSpd
    rhs : array_like, shape (n,)
        Must be orthogonal to the kernel to 1e-8 relative.
    tol : float
        Relative residual target in ``(0, 1e-2]``.
    maxiter : int, optional
        Iteration cap, ``20 * n`` by default.
    return_info : bool
        Also return a :class:`SolveInfo`.
    rhs_scale : float, optional
        Reference size for the consistency and residual tests, ``|rhs|`` by
        default. Pass the size of the unsummed contributions when ``rhs`` is
        the result of heavy cancellation.
    """
    if not 0 < tol <= 1e-2:
        raise InvalidParameterError(f"tol must lie in (0, 1e-2], got {tol}")
    b = np.ascontiguousarray(rhs, dtype=np.float64)
    n = system.n
    if b.shape != (n,):
        raise InvalidParameterError(f"rhs must have shape ({n},), got {b.shape}")
    Z = system.kernel_basis
    bnorm = np.linalg.norm(b)
    scale = bnorm if rhs_scale is None else max(float(rhs_scale), bnorm)
    if len(Z):
        leak = np.linalg.norm(Z @ b)
        if leak > 1e-8 * scale:
            raise ConsistencyError(
                f"right-hand side has a kernel component of relative size {leak / scale:.3e}"
            )
        b = b - Z.T @ (Z @ b)
        bnorm = np.linalg.norm(b)
    maxiter = 20 * n if maxiter is None else int(maxiter)
    M = system.matrix
    diag = M.diagonal()
    dinv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    x, it, _ = kernels.deflated_pcg(
        M.indptr.astype(np.int32),
        M.indices.astype(np.int32),
        M.data,
        b,
        Z,
        dinv,
        float(tol * scale / bnorm) if bnorm else float(tol),
        maxiter,
    )
    resid = float(np.linalg.norm(M @ x - b))
    rel = resid / scale if scale else 0.0
    if it < 0 or rel > tol * (1 + 1e-6):
        raise ConvergenceError(
            f"CG did not reach relative residual {tol:.1e} within {maxiter} iterations (got {rel:.3e})",
            best=x,
        )
    log.debug("deflated CG: n=%d iterations=%d relres=%.2e", n, it, rel)
    info = SolveInfo(it, resid, rel)
    return (x, info) if return_info else x


# ---------------------------------------------------------------- assembly

def _scatter(mesh, local):
    """Assemble per-triangle ``(nt, 3, 3)`` blocks into a CSR matrix."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def stiffness_matrix(mesh):
    """Scalar Laplacian ``int grad(u) . grad(v)``."""
    areas, grads = mesh.gradients()
    local = areas[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)
    K = _scatter(mesh, local)
    return 0.5 * (K + K.T)


def mass_matrix(mesh):
    """Consistent P1 mass matrix."""
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _scatter(mesh, mesh.areas[:, None, None] * base)


def gradient_of(mesh, values):
    """Element-wise constant gradient ``(nt, 2)`` of a P1 scalar field."""
    _, grads = mesh.gradients()
    return np.einsum("tad,ta->td", grads, np.asarray(values)[mesh.triangles])


def vertex_average(mesh, element_values):
    """Area-weighted average of element data onto vertices."""
    areas = mesh.areas
    vals = np.asarray(element_values, dtype=float)
    flat = vals.reshape(len(vals), -1)
    acc = np.zeros((mesh.n_vertices, flat.shape[1]))
    wsum = np.zeros(mesh.n_vertices)
    for a in range(3):
        np.add.at(acc, mesh.triangles[:, a], areas[:, None] * flat)
        np.add.at(wsum, mesh.triangles[:, a], areas)
    return (acc / wsum[:, None]).reshape((mesh.n_vertices,) + vals.shape[1:])


def neumann_system(mesh):
    """Laplacian with the constants declared as kernel."""
    n = mesh.n_vertices
    return SparseSpd(stiffness_matrix(mesh), np.ones((1, n)))


# ---------------------------------------------------------------- projection

@dataclass(frozen=True, eq=False)
class Projection:
    """Result of removing the gradient part of ``u + e``.

    ``u`` is continuous piecewise linear (vertex values), ``e`` an optional
    piecewise-constant offset; the projected field ``u + e - grad(phi)``
    is represented exactly, and ``values`` gives its vertex average.
    """

    mesh: object
    vertex_part: np.ndarray
    element_part: np.ndarray
    gradient: np.ndarray
    potential: np.ndarray
    info: SolveInfo | None = None

    @property
    def element_offset(self):
        """Piecewise-constant part of the projected field, ``e - grad(phi)``."""
        return self.element_part - self.gradient

    @property
    def values(self):
        return self.vertex_part + vertex_average(self.mesh, self.element_offset)

    def _l2(self, u, c):
        """Exact ``int |u + c|^2`` for P1 ``u`` and P0 ``c``."""
        mesh = self.mesh
        M = mass_matrix(mesh)
        uu = sum(u[:, k] @ (M @ u[:, k]) for k in range(2))
        ubar = u[mesh.triangles].mean(axis=1)
        areas = mesh.areas
        return float(uu + 2.0 * np.sum(areas[:, None] * ubar * c) + np.sum(areas[:, None] * c * c))

    def norm_sq(self):
        return self._l2(self.vertex_part, self.element_offset)

    def input_norm_sq(self):
        return self._l2(self.vertex_part, self.element_part)

    def gradient_norm_sq(self):
        return float(np.sum(self.mesh.areas[:, None] * self.gradient**2))

    def inner_with_gradient(self, psi):
        """``int P(u) . grad(psi)`` for a P1 scalar ``psi``."""
        mesh = self.mesh
        g = gradient_of(mesh, psi)
        ubar = self.vertex_part[mesh.triangles].mean(axis=1)
        return float(np.sum(mesh.areas[:, None] * (ubar + self.element_offset) * g))


def project_field(mesh, u, element_offset=None, pin="mean", tol=DEFAULT_TOL):
    """Remove from ``u`` its L2 projection onto discrete gradients.

    Solves ``int (grad(phi) - u) . grad(psi) = 0`` for all P1 ``psi``; the
    potential is fixed by zero mean (``pin='mean'``) or by vanishing at
    vertex 0 (``pin='vertex'``), which yields the same projected field.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices, 2):
        raise InvalidParameterError(f"field must have shape ({mesh.n_vertices}, 2), got {u.shape}")
    e = np.zeros((mesh.n_triangles, 2)) if element_offset is None else np.asarray(element_offset, float)
    areas, grads = mesh.gradients()
    src = u[mesh.triangles].mean(axis=1) + e
    b = np.zeros(mesh.n_vertices)
    contrib = areas[:, None] * np.einsum("td,tad->ta", src, grads)
    np.add.at(b, mesh.triangles, contrib)
    scale = float(np.sqrt(np.sum(contrib**2)))
    if pin == "mean":
        phi, info = solve_spd(neumann_system(mesh), b, tol=tol, return_info=True, rhs_scale=scale)
        mean = (mass_matrix(mesh) @ phi).sum() / areas.sum()
        phi = phi - mean
    elif pin == "vertex":
        K = stiffness_matrix(mesh)
        keep = np.arange(1, mesh.n_vertices)
        sub = SparseSpd(K[keep][:, keep])
        phi_r, info = solve_spd(sub, b[keep], tol=tol, return_info=True, rhs_scale=scale)
        phi = np.concatenate([[0.0], phi_r])
    else:
        raise InvalidParameterError(f"pin must be 'mean' or 'vertex', got {pin!r}")
    return Projection(mesh, u, e, gradient_of(mesh, phi), phi, info)


def rotation_field(mesh):
    """Vertex values of ``(x3, -x2)``."""
    x = mesh.vertices
    return np.column_stack([x[:, 1], -x[:, 0]])


def torsion_constant(mesh, tol=DEFAULT_TOL):
    """Squared L2 norm of the projection of ``(x3, -x2)`` off the gradients.

    Equals the Saint-Venant torsional rigidity factor ``J`` of the section
    (polar moment minus the warping contribution). The mesh is expected
    in centred axes.
    """
    return project_field(mesh, rotation_field(mesh), tol=tol).norm_sq()
