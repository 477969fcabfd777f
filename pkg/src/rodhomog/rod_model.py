"""Limit rod model over rotation-valued frame curves.

A frame curve samples ``R: [0, L] -> SO(3)`` at ``N + 1`` uniform nodes and
stores unit quaternions. Its strain on interval ``i`` is the constant skew
matrix ``A_i = log(R_i^T R_{i+1}) / (L/N)``, kept as an axial vector, and
the energy is the midpoint sum of ``Q0(A_i)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._backend import kernels
from .effective_stiffness import EffectiveStiffness
from .errors import ConvergenceError, InvalidParameterError, ResolutionError
from .so3 import (
    AXL_TO_COORDS,
    axl,
    expm,
    hat,
    inv_jacobian_left,
    inv_jacobian_right,
    is_rotation,
    matrix_to_quat,
    quat_conj,
    quat_mul,
    quat_to_matrix,
    quat_to_rotvec,
    rotvec_to_quat,
    slerp,
)

__all__ = [
    "FrameCurve", "StrainCurve", "RodSolution", "hat", "axl", "frame_reconstruct",
    "strain_of", "rod_energy", "minimize_rod", "axial_stiffness",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FrameCurve:
    """Rotations at ``x1 = i L / N``, ``i = 0..N``, as unit quaternions ``(w, x, y, z)``."""

    quaternions: np.ndarray
    length: float

    def __post_init__(self):
        q = np.array(self.quaternions, dtype=float)
        if q.ndim != 2 or q.shape[1] != 4:
            raise InvalidParameterError(f"quaternions must have shape (N+1, 4), got {q.shape}")
        if len(q) < 3:
            raise InvalidParameterError("a frame curve needs N >= 2 intervals")
        if not self.length > 0:
            raise InvalidParameterError(f"length must be positive, got {self.length}")
        norms = np.linalg.norm(q, axis=1)
        if np.any(norms == 0):
            raise InvalidParameterError("zero quaternion")
        q /= norms[:, None]
        q.flags.writeable = False
        object.__setattr__(self, "quaternions", q)
        object.__setattr__(self, "length", float(self.length))

    @classmethod
    def from_matrices(cls, R, length):
        return cls(matrix_to_quat(np.asarray(R, dtype=float)), length)

    @classmethod
    def constant(cls, n, length, R=None):
        q = matrix_to_quat(np.eye(3) if R is None else R)
        return cls(np.tile(q, (n + 1, 1)), length)

    @property
    def N(self):
        return len(self.quaternions) - 1

    @property
    def spacing(self):
        return self.length / self.N

    @property
    def nodes(self):
        return np.linspace(0.0, self.length, self.N + 1)

    @property
    def midpoints(self):
        return (np.arange(self.N) + 0.5) * self.spacing

    @property
    def matrices(self):
        return quat_to_matrix(self.quaternions)

    def orthogonality_error(self):
        R = self.matrices
        return float(np.abs(np.swapaxes(R, 1, 2) @ R - np.eye(3)).max())

    def premultiplied(self, R):
        """Frame ``R @ R_i`` at every node."""
        return FrameCurve(quat_mul(matrix_to_quat(R), self.quaternions), self.length)

    def to_json(self):
        return {"L": self.length, "N": self.N, "quaternions": self.quaternions.tolist()}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        q = np.asarray(data["quaternions"], dtype=float)
        if len(q) != int(data["N"]) + 1:
            raise InvalidParameterError("quaternion count does not match N")
        return cls(q, float(data["L"]))


@dataclass(frozen=True, eq=False)
class StrainCurve:
    """Per-interval strains ``A_i`` stored as axial vectors ``(N, 3)``."""

    axial: np.ndarray
    length: float

    def __post_init__(self):
        k = np.array(self.axial, dtype=float)
        if k.ndim != 2 or k.shape[1] != 3 or len(k) < 2:
            raise InvalidParameterError(f"axial strains must have shape (N, 3) with N >= 2, got {k.shape}")
        if not self.length > 0:
            raise InvalidParameterError(f"length must be positive, got {self.length}")
        k.flags.writeable = False
        object.__setattr__(self, "axial", k)
        object.__setattr__(self, "length", float(self.length))

    @classmethod
    def constant(cls, A, n, length):
        """Constant strain from a skew matrix or an axial vector."""
        A = np.asarray(A, dtype=float)
        k = axl(A) if A.shape == (3, 3) else A
        return cls(np.tile(k, (n, 1)), length)

    @classmethod
    def from_matrices(cls, A, length):
        return cls(axl(np.asarray(A, dtype=float)), length)

    @property
    def N(self):
        return len(self.axial)

    @property
    def matrices(self):
        return hat(self.axial)

    @property
    def coords(self):
        """``(A12, A13, A23)`` per interval."""
        return self.axial @ AXL_TO_COORDS.T


def frame_reconstruct(strain: StrainCurve, R0=None) -> FrameCurve:
    """Integrate ``R' = R A`` from ``R(0) = R0`` with exact per-interval steps."""
    q0 = matrix_to_quat(np.eye(3) if R0 is None else np.asarray(R0, dtype=float))
    if R0 is not None and not is_rotation(R0, 1e-8):
        raise InvalidParameterError("R0 is not a rotation")
    q = kernels.quat_chain(np.ascontiguousarray(q0), np.ascontiguousarray(strain.axial),
                           strain.length / strain.N)
    return FrameCurve(q, strain.length)


def _increments(frame: FrameCurve):
    rot, max_angle = kernels.quat_chain_log(np.ascontiguousarray(frame.quaternions))
    if max_angle >= math.pi * (1.0 - 1e-12):
        raise ResolutionError(
            f"frame increment of angle {max_angle:.6f} has no unambiguous logarithm; refine N")
    return rot


def strain_of(frame: FrameCurve) -> StrainCurve:
    """Per-interval strains ``log(R_i^T R_{i+1}) / (L/N)``."""
    return StrainCurve(_increments(frame) / frame.spacing, frame.length)


def axial_stiffness(stiff, x1_mid):
    """Per-interval ``Q0`` in axial coordinates, shape ``(N, 3, 3)``.

    ``stiff`` is an :class:`EffectiveStiffness`, a sequence with one entry
    per interval, or a callable of ``x1``.
    """
    P = AXL_TO_COORDS
    if isinstance(stiff, EffectiveStiffness):
        K = P.T @ stiff.Q0 @ P
        return np.broadcast_to(K, (len(x1_mid), 3, 3))
    if callable(stiff):
        items = [stiff(x) for x in x1_mid]
    else:
        items = list(stiff)
        if len(items) != len(x1_mid):
            raise InvalidParameterError(f"need {len(x1_mid)} stiffness entries, got {len(items)}")
    mats = [P.T @ (s.Q0 if isinstance(s, EffectiveStiffness) else np.asarray(s, float)) @ P
            for s in items]
    return np.array(mats)


def _energy_from_axial(k, K, dt):
    return float(dt * np.einsum("ni,nij,nj->", k, K, k))


def rod_energy(frame: FrameCurve, stiff) -> float:
    """Midpoint rule ``sum (L/N) Q0(x1_mid, A_i)``."""
    k = strain_of(frame).axial
    return _energy_from_axial(k, axial_stiffness(stiff, frame.midpoints), frame.spacing)


# ---------------------------------------------------------------- minimization

@dataclass
class RodSolution:
    frame: FrameCurve
    energy: float
    iterations: int
    gradient_norm: float
    history: list = field(default_factory=list)
    converged: bool = True

    @property
    def monotone(self):
        h = np.asarray(self.history)
        return bool(np.all(np.diff(h) <= 0))


def _objective(q, K, dt, moment):
    """Total energy, elastic part and end-rotation vector."""
    rot, max_angle = kernels.quat_chain_log(q)
    if max_angle >= math.pi * (1.0 - 1e-9):
        return math.inf, None, None
    k = rot / dt
    e = _energy_from_axial(k, K, dt)
    phi_end = None
    if moment is not None:
        phi_end = quat_to_rotvec(quat_mul(quat_conj(q[0]), q[-1]))
        e -= float(moment @ phi_end)
    return e, k, phi_end


def minimize_rod(stiff, n: int = 64, length: float = 1.0, R_start=None, R_end=None,
                 end_moment=None, initial: FrameCurve | None = None, max_iter: int = 100_000,
                 rtol: float = 1e-12, gtol: float = 1e-9) -> RodSolution:
    """Minimize the rod energy with a clamped start and a clamped or loaded end.

    Parameters
    ----------
    stiff : EffectiveStiffness, sequence or callable
        Stiffness per interval, see :func:`axial_stiffness`.
    n, length : int, float
        Number of intervals (at least 16) and rod length.
    R_start, R_end : (3, 3) array, optional
        Clamped end frames; ``R_end=None`` leaves the end free.
    end_moment : 3-vector, optional
        Moment ``m`` acting through the potential ``-m . axl log(R_0^T R_N)``;
        only valid with a free end.
    initial : FrameCurve, optional
        Starting guess; by default the geodesic between the end frames.

    Levenberg-Marquardt on the product of rotation groups: interior nodes
    move by ``R_j <- R_j exp(hat(d_j))`` and steps are accepted only when the
    energy decreases. Stops when an accepted step lowers the energy by less
    than ``rtol * energy`` or the gradient norm drops below ``gtol``.
    """
    if n < 16 and initial is None:
        raise InvalidParameterError(f"need at least 16 intervals, got {n}")
    if end_moment is not None and R_end is not None:
        raise InvalidParameterError("an end moment needs a free end")
    R0 = np.eye(3) if R_start is None else np.asarray(R_start, dtype=float)
    for R in (R0, R_end):
        if R is not None and not is_rotation(R, 1e-8):
            raise InvalidParameterError("boundary frame is not a rotation")
    q_start = matrix_to_quat(R0)
    if initial is None:
        q_end = q_start if R_end is None else matrix_to_quat(R_end)
        q = slerp(q_start, q_end, np.linspace(0.0, 1.0, n + 1))
        initial = FrameCurve(q, length)
    else:
        if initial.N < 16:
            raise InvalidParameterError(f"need at least 16 intervals, got {initial.N}")
        n, length = initial.N, initial.length
        if abs(abs(initial.quaternions[0] @ q_start) - 1.0) > 1e-10:
            raise InvalidParameterError("initial guess does not match the start frame")
        if R_end is not None and abs(abs(initial.quaternions[-1] @ matrix_to_quat(R_end)) - 1.0) > 1e-10:
            raise InvalidParameterError("initial guess does not match the end frame")
    dt = length / n
    K = np.ascontiguousarray(axial_stiffness(stiff, initial.midpoints))
    chol = np.linalg.cholesky(K)          # K = C C^T, residual r_i = sqrt(dt) C^T k_i
    moment = None if end_moment is None else np.asarray(end_moment, dtype=float)
    free = np.arange(1, n + 1) if R_end is None else np.arange(1, n)
    nf = len(free)
    col_of = {j: c for c, j in enumerate(free)}

    q = np.ascontiguousarray(initial.quaternions)
    energy, k, phi_end = _objective(q, K, dt, moment)
    if not math.isfinite(energy):
        raise ResolutionError("initial guess has a frame increment of angle pi")
    history = [energy]
    lam = 1e-3
    it = 0
    gnorm = math.inf
    sdt = math.sqrt(dt)
    while True:
        # residuals and Jacobian w.r.t. right-trivialized node perturbations
        phi = k * dt
        Jr = inv_jacobian_right(phi) / dt
        Jl = inv_jacobian_left(phi) / dt
        CT = np.swapaxes(chol, 1, 2)
        r = sdt * np.einsum("nij,nj->ni", CT, k).ravel()
        rows, cols, vals = [], [], []
        for i in range(n):
            for j, block in ((i, -Jl[i]), (i + 1, Jr[i])):
                c = col_of.get(j)
                if c is None:
                    continue
                B = sdt * CT[i] @ block
                rr, cc = np.meshgrid(np.arange(3) + 3 * i, np.arange(3) + 3 * c, indexing="ij")
                rows.append(rr.ravel())
                cols.append(cc.ravel())
                vals.append(B.ravel())
        J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(3 * n, 3 * nf))
        grad = 2.0 * (J.T @ r)
        if moment is not None:
            grad[3 * (nf - 1):] -= inv_jacobian_right(phi_end).T @ moment
        gnorm = float(np.linalg.norm(grad))
        if gnorm < gtol:
            break
        H = (2.0 * (J.T @ J)).tocsc()
        diag = H.diagonal()
        accepted = False
        while not accepted:
            it += 1
            if it > max_iter:
                best = FrameCurve(q, length)
                raise ConvergenceError(
                    f"rod minimization did not converge in {max_iter} iterations "
                    f"(energy {energy:.6e}, gradient {gnorm:.2e})", best=best)
            A = H + sp.diags(lam * np.maximum(diag, 1e-12 * max(diag.max(), 1.0)) + 1e-300)
            delta = -spla.spsolve(A.tocsc(), grad).reshape(nf, 3)
            q_new = q.copy()
            q_new[free] = quat_mul(q[free], rotvec_to_quat(delta))
            q_new[free] /= np.linalg.norm(q_new[free], axis=1, keepdims=True)
            e_new, k_new, phi_new = _objective(q_new, K, dt, moment)
            if e_new < energy:
                accepted = True
                decrease = energy - e_new
                q, energy, k, phi_end = q_new, e_new, k_new, phi_new
                history.append(energy)
                lam = max(lam / 3.0, 1e-12)
            else:
                lam *= 4.0
                if lam > 1e16:
                    break
        if not accepted:
            log.debug("rod LM: damping exhausted at gradient %.3e", gnorm)
            break
        if decrease < rtol * abs(energy):
            break
    sol = RodSolution(FrameCurve(q, length), energy, it, gnorm, history, True)
    log.debug("rod LM: %d iterations, energy %.12e, |grad| %.2e", it, energy, gnorm)
    return sol


def rodrigues(v):
    """Closed-form ``exp(hat(v))``."""
    return expm(v)
