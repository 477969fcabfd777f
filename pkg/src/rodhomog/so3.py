"""Rotation-group utilities: hat/axl, exponential, logarithm, quaternions.

Quaternions are stored as ``(w, x, y, z)``. All functions accept batched
input along leading axes unless noted.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidParameterError

SKEW_TOL = 1e-10


def hat(v):
    """Skew matrix with ``hat(v) @ x == cross(v, x)``."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise InvalidParameterError(f"hat expects 3-vectors, got shape {v.shape}")
    z = np.zeros(v.shape[:-1])
    return np.stack([
        np.stack([z, -v[..., 2], v[..., 1]], -1),
        np.stack([v[..., 2], z, -v[..., 0]], -1),
        np.stack([-v[..., 1], v[..., 0], z], -1),
    ], axis=-2)


def axl(S, tol=SKEW_TOL):
    """Axial vector ``(S32, S13, S21)`` of a skew matrix."""
    S = np.asarray(S, dtype=float)
    if S.shape[-2:] != (3, 3):
        raise InvalidParameterError(f"axl expects 3x3 matrices, got shape {S.shape}")
    asym = np.abs(S + np.swapaxes(S, -1, -2)).max() if S.size else 0.0
    if asym > tol * max(1.0, float(np.abs(S).max())):
        raise InvalidParameterError(f"matrix is not skew-symmetric (|S + S^T| = {asym:.2e})")
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


# (A12, A13, A23) = P @ axl(A)
AXL_TO_COORDS = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])


def axial_to_coords(k):
    return np.asarray(k, dtype=float) @ AXL_TO_COORDS.T


def coords_to_axial(c):
    return np.asarray(c, dtype=float) @ AXL_TO_COORDS


def _sinc_terms(theta):
    """``sin t / t`` and ``(1 - cos t) / t^2`` with series near zero."""
    t2 = theta * theta
    small = theta < 1e-4
    ts = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(ts) / ts)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(ts)) / (ts * ts))
    return a, b


def expm(v):
    """Rotation matrix ``exp(hat(v))`` by the Rodrigues formula."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    a, b = _sinc_terms(theta)
    K = hat(v)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)


def logm(R):
    """Principal rotation vector of ``R`` (angle in ``[0, pi]``)."""
    return quat_to_rotvec(matrix_to_quat(R))


def inv_jacobian_left(phi):
    """``J_l^{-1}(phi)``: ``log(exp(e) exp(phi)) = phi + J_l^{-1} e + O(e^2)``."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)
    small = theta < 1e-4
    ts = np.where(small, 1.0, theta)
    c = np.where(small, 1.0 / 12.0 + theta**2 / 720.0,
                 1.0 / ts**2 - (1.0 + np.cos(ts)) / (2.0 * ts * np.sin(np.where(small, 1.0, ts))))
    K = hat(phi)
    return np.eye(3) - 0.5 * K + c[..., None, None] * (K @ K)


def inv_jacobian_right(phi):
    """``J_r^{-1}(phi)``: ``log(exp(phi) exp(e)) = phi + J_r^{-1} e + O(e^2)``."""
    return inv_jacobian_left(-np.asarray(phi, dtype=float))


# ---------------------------------------------------------------- quaternions

def quat_mul(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, pv = p[..., 0], p[..., 1:]
    qw, qv = q[..., 0], q[..., 1:]
    w = pw * qw - np.sum(pv * qv, axis=-1)
    v = pw[..., None] * qv + qw[..., None] * pv + np.cross(pv, qv)
    return np.concatenate([w[..., None], v], axis=-1)


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def rotvec_to_quat(v):
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    half = 0.5 * theta
    small = theta < 1e-8
    k = np.where(small, 0.5 - theta**2 / 48.0, np.sin(half) / np.where(small, 1.0, theta))
    return np.concatenate([np.cos(half)[..., None], k[..., None] * v], axis=-1)


def quat_to_rotvec(q):
    """Principal rotation vector; the sign of ``q`` is irrelevant."""
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0, -q, q)
    w, v = q[..., 0], q[..., 1:]
    s = np.linalg.norm(v, axis=-1)
    ang = 2.0 * np.arctan2(s, w)
    small = s < 1e-12
    f = np.where(small, 2.0 / np.where(small, w, 1.0), ang / np.where(small, 1.0, s))
    return f[..., None] * v


def quat_to_matrix(q):
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], axis=-2)


def matrix_to_quat(R):
    """Unit quaternion with non-negative ``w`` (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    flat = R.reshape(-1, 3, 3)
    out = np.empty((len(flat), 4))
    for n, M in enumerate(flat):
        tr = M[0, 0] + M[1, 1] + M[2, 2]
        cand = np.array([tr, M[0, 0], M[1, 1], M[2, 2]])
        k = int(np.argmax(cand))
        if k == 0:
            s = 2.0 * math.sqrt(max(1.0 + tr, 0.0))
            q = [0.25 * s, (M[2, 1] - M[1, 2]) / s, (M[0, 2] - M[2, 0]) / s, (M[1, 0] - M[0, 1]) / s]
        elif k == 1:
            s = 2.0 * math.sqrt(max(1.0 + 2 * M[0, 0] - tr, 0.0))
            q = [(M[2, 1] - M[1, 2]) / s, 0.25 * s, (M[0, 1] + M[1, 0]) / s, (M[0, 2] + M[2, 0]) / s]
        elif k == 2:
            s = 2.0 * math.sqrt(max(1.0 + 2 * M[1, 1] - tr, 0.0))
            q = [(M[0, 2] - M[2, 0]) / s, (M[0, 1] + M[1, 0]) / s, 0.25 * s, (M[1, 2] + M[2, 1]) / s]
        else:
            s = 2.0 * math.sqrt(max(1.0 + 2 * M[2, 2] - tr, 0.0))
            q = [(M[1, 0] - M[0, 1]) / s, (M[0, 2] + M[2, 0]) / s, (M[1, 2] + M[2, 1]) / s, 0.25 * s]
        q = np.array(q)
        q /= np.linalg.norm(q)
        out[n] = -q if q[0] < 0 else q
    return out.reshape(R.shape[:-2] + (4,))


def is_rotation(R, tol=1e-10):
    R = np.asarray(R, dtype=float)
    err = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max()
    return bool(err <= tol and np.all(np.linalg.det(R) > 0))


def slerp(q0, q1, t):
    """Geodesic interpolation between unit quaternions at parameters ``t``."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if q0 @ q1 < 0:
        q1 = -q1
    rel = quat_to_rotvec(quat_mul(quat_conj(q0), q1))
    t = np.asarray(t, dtype=float)
    return quat_mul(q0, rotvec_to_quat(t[..., None] * rel))


def polar_rotation(F):
    """Closest rotation to each ``F`` (polar factor with det +1)."""
    U, _, Vt = np.linalg.svd(F)
    d = np.sign(np.linalg.det(U @ Vt))
    d = np.where(d == 0, 1.0, d)
    D = np.ones(np.shape(F)[:-2] + (3,))
    D[..., 2] = d
    return (U * D[..., None, :]) @ Vt
