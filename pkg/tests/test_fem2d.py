from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from rodhomog.cross_section import refine
from rodhomog.errors import ConsistencyError, ConvergenceError, InvalidParameterError
from rodhomog.fem2d import (
    SparseSpd,
    gradient_of,
    mass_matrix,
    neumann_system,
    project_field,
    rotation_field,
    solve_spd,
    stiffness_matrix,
    torsion_constant,
    vertex_average,
)

from .conftest import section


def _square_series(a=1.0, terms=200):
    """Saint-Venant torsion constant of a square of side ``a`` (classical series)."""
    k = np.arange(terms)
    s = np.sum(np.tanh((2 * k + 1) * math.pi / 2) / (2 * k + 1) ** 5)
    return a**4 * (1.0 / 3.0 - 64.0 / math.pi**5 * s)


def _l2(mesh, u):
    M = mass_matrix(mesh)
    return math.sqrt(sum(u[:, k] @ (M @ u[:, k]) for k in range(u.shape[1])))


class TestSparseSpd:
    def test_identity(self):
        x = solve_spd(SparseSpd(sp.identity(3, format="csr")), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(x, [1.0, 2.0, 3.0], rtol=1e-12)

    def test_two_by_two(self):
        M = SparseSpd(sp.csr_matrix([[2.0, -1.0], [-1.0, 2.0]]))
        np.testing.assert_allclose(solve_spd(M, np.array([1.0, 0.0])), [2 / 3, 1 / 3], rtol=1e-10)

    def test_path_laplacian_matches_pseudo_inverse(self):
        L = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
        sysm = SparseSpd(sp.csr_matrix(L), np.ones((1, 3)))
        b = np.array([1.0, 0.0, -1.0])
        x = solve_spd(sysm, b)
        np.testing.assert_allclose(x, np.linalg.pinv(L) @ b, atol=1e-12)
        np.testing.assert_allclose(x, [1.0, 0.0, -1.0], atol=1e-12)
        assert abs(x.sum()) < 1e-12

    def test_inconsistent_rhs(self):
        L = np.array([[1.0, -1.0], [-1.0, 1.0]])
        with pytest.raises(ConsistencyError):
            solve_spd(SparseSpd(sp.csr_matrix(L), np.ones((1, 2))), np.array([1.0, 0.0]))

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidParameterError, match="symmetric"):
            SparseSpd(sp.csr_matrix([[2.0, 1.0], [0.0, 2.0]]))

    def test_wrong_kernel_rejected(self):
        with pytest.raises(InvalidParameterError, match="null space"):
            SparseSpd(sp.csr_matrix([[2.0, -1.0], [-1.0, 2.0]]), np.ones((1, 2)))

    @pytest.mark.parametrize("tol", [0.0, 0.5, -1e-8])
    def test_tolerance_range(self, tol):
        with pytest.raises(InvalidParameterError):
            solve_spd(SparseSpd(sp.identity(2, format="csr")), np.ones(2), tol=tol)

    def test_iteration_cap(self, disc_small):
        mesh, _ = disc_small
        sysm = neumann_system(mesh)
        b = mass_matrix(mesh) @ (mesh.vertices[:, 0] ** 2)
        b -= sysm.kernel_basis.T @ (sysm.kernel_basis @ b)
        with pytest.raises(ConvergenceError) as err:
            solve_spd(sysm, b, maxiter=2)
        assert err.value.best is not None and err.value.best.shape == b.shape

    def test_solution_orthogonal_to_kernel(self, disc_small, rng):
        mesh, _ = disc_small
        sysm = neumann_system(mesh)
        b = rng.normal(size=sysm.n)
        b -= b.mean()
        x, info = solve_spd(sysm, b, return_info=True)
        assert abs(sysm.kernel_basis @ x).max() < 1e-10 * np.linalg.norm(x)
        assert info.relative_residual <= 1e-10

    def test_deterministic(self, disc_small, rng):
        mesh, _ = disc_small
        sysm = neumann_system(mesh)
        b = rng.normal(size=sysm.n)
        b -= b.mean()
        np.testing.assert_array_equal(solve_spd(sysm, b), solve_spd(sysm, b))

    @given(st.integers(3, 30), st.integers(0, 2**31 - 1))
    def test_random_spd(self, n, seed):
        r = np.random.default_rng(seed)
        B = r.normal(size=(n, n))
        A = B @ B.T + n * np.eye(n)
        b = r.normal(size=n)
        x = solve_spd(SparseSpd(sp.csr_matrix(A)), b)
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b) * (1 + 1e-6)


class TestAssembly:
    def test_stiffness_kills_constants(self, disc_small):
        mesh, _ = disc_small
        K = stiffness_matrix(mesh)
        assert abs(K @ np.ones(mesh.n_vertices)).max() < 1e-12

    def test_stiffness_energy_of_linear(self, disc_small):
        mesh, _ = disc_small
        u = 2.0 * mesh.vertices[:, 0] - mesh.vertices[:, 1]
        assert u @ stiffness_matrix(mesh) @ u == pytest.approx(5.0 * mesh.area, rel=1e-12)

    def test_mass_integrates_quadratics(self, disc_small):
        mesh, geo = disc_small
        x = mesh.vertices[:, 0]
        assert x @ mass_matrix(mesh) @ x == pytest.approx(geo.mu2, rel=1e-12)

    def test_gradient_of_linear(self, disc_small):
        mesh, _ = disc_small
        g = gradient_of(mesh, 3.0 * mesh.vertices[:, 0] + 0.5 * mesh.vertices[:, 1])
        np.testing.assert_allclose(g, np.tile([3.0, 0.5], (mesh.n_triangles, 1)), atol=1e-12)

    def test_vertex_average_of_constant(self, disc_small):
        mesh, _ = disc_small
        v = vertex_average(mesh, np.tile([1.0, -2.0], (mesh.n_triangles, 1)))
        np.testing.assert_allclose(v, np.tile([1.0, -2.0], (mesh.n_vertices, 1)), atol=1e-14)


class TestProjection:
    def test_gradient_field_annihilated(self):
        mesh, _ = section("disc", [1.0], 10000)
        u = 2.0 * mesh.vertices
        P = project_field(mesh, u)
        assert _l2(mesh, P.values) <= 1e-2 * _l2(mesh, u)

    def test_rotation_field_preserved(self):
        mesh, _ = section("disc", [1.0], 10000)
        u = rotation_field(mesh)
        P = project_field(mesh, u)
        assert _l2(mesh, P.values - u) <= 1e-2 * _l2(mesh, u)

    def test_constant_annihilated(self, disc_small):
        mesh, _ = disc_small
        u = np.tile([1.0, 0.0], (mesh.n_vertices, 1))
        P = project_field(mesh, u)
        assert P.norm_sq() <= 1e-18

    def test_idempotent(self, square_small, rng):
        mesh, _ = square_small
        u = rng.normal(size=(mesh.n_vertices, 2))
        P = project_field(mesh, u)
        PP = project_field(mesh, P.vertex_part, element_offset=P.element_offset)
        assert PP.gradient_norm_sq() <= 1e-16 * P.input_norm_sq()
        assert PP.norm_sq() == pytest.approx(P.norm_sq(), rel=1e-10)

    def test_orthogonal_to_gradients(self, square_small, rng):
        mesh, _ = square_small
        u = rng.normal(size=(mesh.n_vertices, 2))
        P = project_field(mesh, u)
        scale = math.sqrt(P.input_norm_sq())
        for _ in range(20):
            psi = rng.normal(size=mesh.n_vertices)
            gpsi = math.sqrt(psi @ stiffness_matrix(mesh) @ psi)
            assert abs(P.inner_with_gradient(psi)) <= 1e-8 * scale * gpsi

    def test_pythagoras(self, square_small, rng):
        mesh, _ = square_small
        u = rng.normal(size=(mesh.n_vertices, 2))
        P = project_field(mesh, u)
        assert P.input_norm_sq() == pytest.approx(P.norm_sq() + P.gradient_norm_sq(), rel=1e-6)

    def test_pinning_does_not_matter(self, square_small, rng):
        mesh, _ = square_small
        u = rng.normal(size=(mesh.n_vertices, 2))
        a = project_field(mesh, u, pin="mean")
        b = project_field(mesh, u, pin="vertex")
        np.testing.assert_allclose(a.values, b.values, atol=1e-8)
        np.testing.assert_allclose(a.gradient, b.gradient, atol=1e-8)

    def test_bad_shape(self, square_small):
        mesh, _ = square_small
        with pytest.raises(InvalidParameterError):
            project_field(mesh, np.zeros((3, 2)))

    def test_bad_pin(self, square_small):
        mesh, _ = square_small
        with pytest.raises(InvalidParameterError):
            project_field(mesh, np.zeros((mesh.n_vertices, 2)), pin="corner")


class TestTorsionConstant:
    def test_disc(self):
        mesh, _ = section("disc", [1.0], 4000)
        assert torsion_constant(mesh) == pytest.approx(math.pi / 2, rel=1e-2)

    def test_square_series_oracle(self):
        oracle = _square_series()
        assert oracle == pytest.approx(0.1406, abs=5e-5)
        mesh, _ = section("rectangle", [1.0, 1.0], 4000)
        assert torsion_constant(mesh) == pytest.approx(oracle, rel=1e-2)

    def test_ellipse(self):
        mesh, _ = section("ellipse", [2.0, 1.0], 8000)
        assert torsion_constant(mesh) == pytest.approx(8 * math.pi / 5, rel=1e-2)

    @pytest.mark.parametrize("kind, params", [
        ("rectangle", [2.0, 1.0]), ("annulus", [1.0, 0.6]), ("L-shape", [1.0, 0.3])])
    def test_bounded_by_polar_moment(self, kind, params):
        mesh, geo = section(kind, params, 600)
        c = torsion_constant(mesh)
        assert 0 < c <= geo.mu2 + geo.mu3

    def test_refinement_deltas_decrease(self):
        mesh, _ = section("rectangle", [1.0, 1.0], 100)
        values = []
        for _ in range(4):
            values.append(torsion_constant(mesh))
            mesh = refine(mesh)
        deltas = np.abs(np.diff(values))
        assert np.all(deltas[1:] < deltas[:-1])
