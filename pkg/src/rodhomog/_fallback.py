"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import math

import numpy as np
import scipy.sparse as sp


def quat_chain(q0, omega, dt):
    omega = np.asarray(omega, dtype=float)
    out = np.empty((len(omega) + 1, 4))
    w, x, y, z = np.asarray(q0, dtype=float) / np.linalg.norm(q0)
    out[0] = w, x, y, z
    sqrt, sin, cos = math.sqrt, math.sin, math.cos
    for i, (o0, o1, o2) in enumerate(omega.tolist()):
        wn = sqrt(o0 * o0 + o1 * o1 + o2 * o2)
        half = 0.5 * dt * wn
        k = 0.5 * dt * (1.0 - half * half / 6.0) if half < 1e-8 else sin(half) / wn
        a, b, c, d = cos(half), k * o0, k * o1, k * o2
        w, x, y, z = (w * a - x * b - y * c - z * d,
                      w * b + x * a + y * d - z * c,
                      w * c - x * d + y * a + z * b,
                      w * d + x * c - y * b + z * a)
        nrm = sqrt(w * w + x * x + y * y + z * z)
        w, x, y, z = w / nrm, x / nrm, y / nrm, z / nrm
        out[i + 1] = w, x, y, z
    return out


def quat_chain_log(q):
    q = np.asarray(q, dtype=float)
    a, b = q[:-1], q[1:]
    aw, av = a[:, 0], -a[:, 1:]
    bw, bv = b[:, 0], b[:, 1:]
    rw = aw * bw - np.einsum("ij,ij->i", av, bv)
    rv = aw[:, None] * bv + bw[:, None] * av + np.cross(av, bv)
    flip = rw < 0
    rw = np.where(flip, -rw, rw)
    rv = np.where(flip[:, None], -rv, rv)
    s = np.linalg.norm(rv, axis=1)
    ang = 2.0 * np.arctan2(s, rw)
    small = s < 1e-12
    f = np.where(small, 2.0 / np.where(small, rw, 1.0), ang / np.where(small, 1.0, s))
    return f[:, None] * rv, float(ang.max()) if len(ang) else 0.0


def p1_gradients(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det2 = e1[:, 0] * e2[:, 1] - e2[:, 0] * e1[:, 1]
    safe = np.where(det2 == 0.0, 1.0, det2)
    x, y = p[..., 0], p[..., 1]
    grads = np.empty((len(triangles), 3, 2))
    grads[:, 0, 0] = y[:, 1] - y[:, 2]
    grads[:, 0, 1] = x[:, 2] - x[:, 1]
    grads[:, 1, 0] = y[:, 2] - y[:, 0]
    grads[:, 1, 1] = x[:, 0] - x[:, 2]
    grads[:, 2, 0] = y[:, 0] - y[:, 1]
    grads[:, 2, 1] = x[:, 1] - x[:, 0]
    grads /= safe[:, None, None]
    return 0.5 * det2, grads


def deflated_pcg(indptr, indices, data, b, Z, dinv, tol, maxiter):
    n = len(b)
    Z = np.asarray(Z, dtype=float)
    if len(Z) and Z.shape[1] != n:
        raise ValueError(f"deflation basis rows must have length {n}, got {Z.shape[1]}")
    if len(indptr) != n + 1 or len(dinv) != n:
        raise ValueError("matrix and vector sizes disagree")
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))

    def deflate(v):
        return v - Z.T @ (Z @ v) if len(Z) else v

    x = np.zeros(n)
    r = deflate(np.array(b, dtype=float))
    bnorm = np.linalg.norm(b)
    rnorm = np.linalg.norm(r)
    if bnorm == 0.0 or rnorm <= tol * bnorm:
        return deflate(x), 0, rnorm
    z = deflate(dinv * r)
    p = z.copy()
    rz = r @ z
    it = 0
    while True:
        if it >= maxiter:
            it = -1
            break
        it += 1
        q = deflate(A @ p)
        pq = p @ q
        if pq <= 0.0:
            it = -1
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            break
        z = deflate(dinv * r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return deflate(x), it, rnorm


def iso_energy_density(F, mu, lam, pen):
    C = np.einsum("nka,nkb->nab", F, F) - np.eye(3)
    tr = np.trace(C, axis1=1, axis2=2)
    det = np.linalg.det(F)
    neg = np.minimum(det, 0.0)
    W = 0.5 * mu * np.einsum("nab,nab->n", C, C) + 0.25 * lam * tr**2 + pen * neg**2
    return W, det
