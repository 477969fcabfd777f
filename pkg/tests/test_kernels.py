from __future__ import annotations

import numpy as np
import pytest

import rodhomog
from rodhomog import _fallback
from rodhomog.fem2d import stiffness_matrix
from rodhomog.so3 import expm, quat_to_matrix, rotvec_to_quat

from .conftest import _kernels, section

needs_cython = pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")


class TestEachBackend:
    def test_quat_chain_matches_exp(self, backend, rng):
        k = rng.normal(size=(50, 3))
        q = backend.quat_chain(np.array([1.0, 0.0, 0.0, 0.0]), k, 0.1)
        R = np.eye(3)
        for ki in k:
            R = R @ expm(0.1 * ki)
        np.testing.assert_allclose(quat_to_matrix(q[-1]), R, atol=1e-12)

    def test_quat_chain_log_inverts_chain(self, backend, rng):
        k = rng.normal(size=(30, 3))
        q = backend.quat_chain(rotvec_to_quat(rng.normal(size=3)), k, 0.05)
        rot, ang = backend.quat_chain_log(q)
        np.testing.assert_allclose(rot, 0.05 * k, atol=1e-12)
        assert ang == pytest.approx(np.linalg.norm(0.05 * k, axis=1).max())

    def test_p1_gradients(self, backend):
        v = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
        area, g = backend.p1_gradients(v, np.array([[0, 1, 2]], dtype=np.int64))
        assert area[0] == pytest.approx(1.0)
        np.testing.assert_allclose(g[0], [[-0.5, -1.0], [0.5, 0.0], [0.0, 1.0]])

    def test_deflated_pcg_singular(self, backend, disc_small, rng):
        mesh, _ = disc_small
        K = stiffness_matrix(mesh).tocsr()
        K.sort_indices()
        n = K.shape[0]
        b = rng.normal(size=n)
        b -= b.mean()
        Z = np.ones((1, n)) / np.sqrt(n)
        x, it, res = backend.deflated_pcg(K.indptr.astype(np.int32), K.indices.astype(np.int32), K.data,
                                          b, Z, 1.0 / K.diagonal(), 1e-12, 10 * n)
        assert it > 0
        assert np.linalg.norm(K @ x - b) <= 1e-10 * np.linalg.norm(b)
        assert abs(x.sum()) <= 1e-10 * np.linalg.norm(x) * np.sqrt(n)

    def test_deflated_pcg_rejects_transposed_basis(self, backend):
        n = 4
        with pytest.raises(ValueError):
            backend.deflated_pcg(np.arange(n + 1, dtype=np.int32), np.arange(n, dtype=np.int32), np.ones(n),
                                 np.ones(n), np.ones((n, 1)), np.ones(n), 1e-10, 10)

    def test_iso_energy(self, backend):
        F = np.array([np.eye(3), 2 * np.eye(3), np.diag([1.0, 1.0, -1.0])])
        W, det = backend.iso_energy_density(F, np.ones(3), np.full(3, 0.5), np.full(3, 2.0))
        # F = 2I: C = 3I, mu/2 * 27 + lam/4 * 81
        np.testing.assert_allclose(W, [0.0, 13.5 + 10.125, 2.0], atol=1e-14)
        np.testing.assert_allclose(det, [1.0, 8.0, -1.0])


@needs_cython
class TestParity:
    def test_quat_chain(self, rng):
        k = rng.normal(size=(1000, 3))
        q0 = rotvec_to_quat(rng.normal(size=3))
        np.testing.assert_allclose(_kernels.quat_chain(q0, k, 0.01), _fallback.quat_chain(q0, k, 0.01),
                                   atol=1e-14)

    def test_quat_chain_log(self, rng):
        q = _fallback.quat_chain(np.array([1.0, 0, 0, 0]), rng.normal(size=(200, 3)), 0.1)
        a, b = _kernels.quat_chain_log(q), _fallback.quat_chain_log(q)
        np.testing.assert_allclose(a[0], b[0], atol=1e-14)
        assert a[1] == pytest.approx(b[1], rel=1e-14)

    def test_p1_gradients(self):
        mesh, _ = section("L-shape", [1.0, 0.3], 300)
        v, t = np.ascontiguousarray(mesh.vertices), np.ascontiguousarray(mesh.triangles, dtype=np.int64)
        a, b = _kernels.p1_gradients(v, t), _fallback.p1_gradients(v, t)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-14)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-12)

    def test_iso_energy(self, rng):
        F = np.eye(3) + 0.4 * rng.normal(size=(500, 3, 3))
        mu, lam = rng.uniform(0.5, 2, 500), rng.uniform(0, 2, 500)
        a, b = _kernels.iso_energy_density(F, mu, lam, 2 * mu), _fallback.iso_energy_density(F, mu, lam, 2 * mu)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-14)


def test_backend_selection():
    assert rodhomog.BACKEND in ("cython", "python")


def test_forced_fallback():
    import subprocess
    import sys

    code = "import rodhomog; print(rodhomog.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                         env={"RODHOMOG_PURE_PYTHON": "1", "PATH": ""})
    assert out.stdout.strip() == "python"
