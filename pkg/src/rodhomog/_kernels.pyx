# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Every function here has a numpy twin in ``_fallback`` with the same
signature and the same results up to round-off; ``_backend`` picks one
at import time.
"""

import numpy as np

from libc.math cimport sqrt, sin, cos, atan2, fabs


def quat_chain(const double[::1] q0, const double[:, ::1] omega, double dt):
    """Integrate ``q' = q * (0, omega/2)`` by exact per-interval rotations."""
    cdef Py_ssize_t n = omega.shape[0]
    out_arr = np.empty((n + 1, 4))
    cdef double[:, ::1] out = out_arr
    cdef double w = q0[0], x = q0[1], y = q0[2], z = q0[3]
    cdef double nw, nx, ny, nz, a, b, c, d, nrm, wn, half, k
    cdef Py_ssize_t i
    with nogil:
        nrm = sqrt(w * w + x * x + y * y + z * z)
        w /= nrm; x /= nrm; y /= nrm; z /= nrm
        out[0, 0] = w; out[0, 1] = x; out[0, 2] = y; out[0, 3] = z
        for i in range(n):
            wn = sqrt(omega[i, 0] * omega[i, 0] + omega[i, 1] * omega[i, 1]
                      + omega[i, 2] * omega[i, 2])
            half = 0.5 * dt * wn
            if half < 1e-8:
                k = 0.5 * dt * (1.0 - half * half / 6.0)
            else:
                k = sin(half) / wn
            a = cos(half)
            b = k * omega[i, 0]
            c = k * omega[i, 1]
            d = k * omega[i, 2]
            nw = w * a - x * b - y * c - z * d
            nx = w * b + x * a + y * d - z * c
            ny = w * c - x * d + y * a + z * b
            nz = w * d + x * c - y * b + z * a
            nrm = sqrt(nw * nw + nx * nx + ny * ny + nz * nz)
            w = nw / nrm; x = nx / nrm; y = ny / nrm; z = nz / nrm
            out[i + 1, 0] = w; out[i + 1, 1] = x
            out[i + 1, 2] = y; out[i + 1, 3] = z
    return out_arr


def quat_chain_log(const double[:, ::1] q):
    """Principal rotation vectors of ``conj(q[i]) * q[i+1]``.

    Returns ``(rotvecs, max_angle)``; angles lie in ``[0, pi]``.
    """
    cdef Py_ssize_t n = q.shape[0] - 1
    out_arr = np.empty((n, 3))
    cdef double[:, ::1] out = out_arr
    cdef double aw, ax, ay, az, bw, bx, by, bz, rw, rx, ry, rz, s, ang, f
    cdef double max_angle = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            aw = q[i, 0]; ax = -q[i, 1]; ay = -q[i, 2]; az = -q[i, 3]
            bw = q[i + 1, 0]; bx = q[i + 1, 1]; by = q[i + 1, 2]; bz = q[i + 1, 3]
            rw = aw * bw - ax * bx - ay * by - az * bz
            rx = aw * bx + ax * bw + ay * bz - az * by
            ry = aw * by - ax * bz + ay * bw + az * bx
            rz = aw * bz + ax * by - ay * bx + az * bw
            if rw < 0.0:
                rw = -rw; rx = -rx; ry = -ry; rz = -rz
            s = sqrt(rx * rx + ry * ry + rz * rz)
            ang = 2.0 * atan2(s, rw)
            if s < 1e-12:
                f = 2.0 / rw
            else:
                f = ang / s
            out[i, 0] = f * rx; out[i, 1] = f * ry; out[i, 2] = f * rz
            if ang > max_angle:
                max_angle = ang
    return out_arr, max_angle


def p1_gradients(const double[:, ::1] vertices, const long[:, ::1] triangles):
    """Signed areas and barycentric gradients of linear triangles."""
    cdef Py_ssize_t nt = triangles.shape[0]
    areas_arr = np.empty(nt)
    grads_arr = np.empty((nt, 3, 2))
    cdef double[::1] areas = areas_arr
    cdef double[:, :, ::1] grads = grads_arr
    cdef double x0, y0, x1, y1, x2, y2, det2
    cdef Py_ssize_t t
    with nogil:
        for t in range(nt):
            x0 = vertices[triangles[t, 0], 0]; y0 = vertices[triangles[t, 0], 1]
            x1 = vertices[triangles[t, 1], 0]; y1 = vertices[triangles[t, 1], 1]
            x2 = vertices[triangles[t, 2], 0]; y2 = vertices[triangles[t, 2], 1]
            det2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            areas[t] = 0.5 * det2
            if det2 == 0.0:
                det2 = 1.0
            grads[t, 0, 0] = (y1 - y2) / det2
            grads[t, 0, 1] = (x2 - x1) / det2
            grads[t, 1, 0] = (y2 - y0) / det2
            grads[t, 1, 1] = (x0 - x2) / det2
            grads[t, 2, 0] = (y0 - y1) / det2
            grads[t, 2, 1] = (x1 - x0) / det2
    return areas_arr, grads_arr


cdef inline void _csr_matvec(const int[::1] indptr, const int[::1] indices, const double[::1] data,
                             const double[::1] x, double[::1] y) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(y.shape[0]):
        acc = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            acc = acc + data[j] * x[indices[j]]
        y[i] = acc


cdef inline void _deflate(const double[:, ::1] Z, double[::1] v, double[::1] c) noexcept nogil:
    cdef Py_ssize_t k = Z.shape[0], n = v.shape[0], a, i
    cdef double acc
    for a in range(k):
        acc = 0.0
        for i in range(n):
            acc = acc + Z[a, i] * v[i]
        c[a] = acc
    for a in range(k):
        for i in range(n):
            v[i] = v[i] - c[a] * Z[a, i]


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        acc = acc + a[i] * b[i]
    return acc


def deflated_pcg(const int[::1] indptr, const int[::1] indices, const double[::1] data,
                 const double[::1] b, const double[:, ::1] Z, const double[::1] dinv,
                 double tol, long maxiter):
    """Jacobi-preconditioned CG restricted to the complement of ``Z``.

    ``Z`` rows must be orthonormal.  Returns ``(x, iterations, residual_norm)``;
    ``iterations == -1`` flags that the cap was hit.
    """
    cdef Py_ssize_t n = b.shape[0], i
    if Z.shape[0] > 0 and Z.shape[1] != n:
        raise ValueError(f"deflation basis rows must have length {n}, got {Z.shape[1]}")
    if indptr.shape[0] != n + 1 or dinv.shape[0] != n:
        raise ValueError("matrix and vector sizes disagree")
    x_arr = np.zeros(n)
    r_arr = np.array(b, dtype=np.float64)
    z_arr = np.empty(n)
    p_arr = np.empty(n)
    q_arr = np.empty(n)
    c_arr = np.empty(max(Z.shape[0], 1))
    cdef double[::1] x = x_arr, r = r_arr, zz = z_arr, p = p_arr, q = q_arr, c = c_arr
    cdef double bnorm, rz, rz_new, alpha, beta, pq, rnorm
    cdef long it = 0
    with nogil:
        _deflate(Z, r, c)
        bnorm = sqrt(_dot(b, b))
        rnorm = sqrt(_dot(r, r))
        if bnorm == 0.0 or rnorm <= tol * bnorm:
            it = 0
        else:
            for i in range(n):
                zz[i] = dinv[i] * r[i]
            _deflate(Z, zz, c)
            for i in range(n):
                p[i] = zz[i]
            rz = _dot(r, zz)
            while True:
                if it >= maxiter:
                    it = -1
                    break
                it += 1
                _csr_matvec(indptr, indices, data, p, q)
                _deflate(Z, q, c)
                pq = _dot(p, q)
                if pq <= 0.0:
                    it = -1
                    break
                alpha = rz / pq
                for i in range(n):
                    x[i] = x[i] + alpha * p[i]
                    r[i] = r[i] - alpha * q[i]
                rnorm = sqrt(_dot(r, r))
                if rnorm <= tol * bnorm:
                    break
                for i in range(n):
                    zz[i] = dinv[i] * r[i]
                _deflate(Z, zz, c)
                rz_new = _dot(r, zz)
                beta = rz_new / rz
                rz = rz_new
                for i in range(n):
                    p[i] = zz[i] + beta * p[i]
        _deflate(Z, x, c)
    return x_arr, it, rnorm


def iso_energy_density(const double[:, :, ::1] F, const double[::1] mu, const double[::1] lam,
                       const double[::1] pen):
    """``(mu/2)|C-I|^2 + (lam/4)(tr C - 3)^2 + pen*min(det F, 0)^2`` per cell."""
    cdef Py_ssize_t n = F.shape[0], i, a, b, k
    W_arr = np.empty(n)
    det_arr = np.empty(n)
    cdef double[::1] W = W_arr, det = det_arr
    cdef double C, s2, tr, d, neg
    with nogil:
        for i in range(n):
            s2 = 0.0
            tr = 0.0
            for a in range(3):
                for b in range(3):
                    C = 0.0
                    for k in range(3):
                        C = C + F[i, k, a] * F[i, k, b]
                    if a == b:
                        C = C - 1.0
                        tr = tr + C
                    s2 = s2 + C * C
            d = (F[i, 0, 0] * (F[i, 1, 1] * F[i, 2, 2] - F[i, 1, 2] * F[i, 2, 1])
                 - F[i, 0, 1] * (F[i, 1, 0] * F[i, 2, 2] - F[i, 1, 2] * F[i, 2, 0])
                 + F[i, 0, 2] * (F[i, 1, 0] * F[i, 2, 1] - F[i, 1, 1] * F[i, 2, 0]))
            neg = d if d < 0.0 else 0.0
            W[i] = 0.5 * mu[i] * s2 + 0.25 * lam[i] * tr * tr + pen[i] * neg * neg
            det[i] = d
    return W_arr, det_arr
