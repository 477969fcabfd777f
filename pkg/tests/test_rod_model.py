from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rodhomog.effective_stiffness import EffectiveStiffness, effective_matrix
from rodhomog.errors import InvalidParameterError, ResolutionError
from rodhomog.material import make_isotropic, youngs_modulus
from rodhomog.rod_model import (
    FrameCurve,
    StrainCurve,
    axial_stiffness,
    frame_reconstruct,
    minimize_rod,
    rod_energy,
    rodrigues,
    strain_of,
)
from rodhomog.so3 import axial_to_coords, expm, matrix_to_quat, slerp

from .conftest import section

vec3 = arrays(float, (3,), elements=st.floats(-2, 2))


@pytest.fixture(scope="module")
def iso_stiff():
    mesh, geo = section("disc", [1.0], 1500)
    return effective_matrix(mesh, make_isotropic(0.5, 1.0), geo)


@pytest.fixture(scope="module")
def rect_stiff():
    mesh, geo = section("rectangle", [2.0, 1.0], 600)
    return effective_matrix(mesh, make_isotropic(0.5, 1.0), geo)


class TestFrameCurve:
    def test_constant(self):
        f = FrameCurve.constant(10, 2.0)
        assert f.N == 10 and f.spacing == 0.2
        np.testing.assert_allclose(f.matrices, np.broadcast_to(np.eye(3), (11, 3, 3)))

    def test_json_round_trip(self):
        f = frame_reconstruct(StrainCurve.constant([0.3, -0.1, 0.2], 8, 1.5))
        g = FrameCurve.from_json(f.to_json())
        np.testing.assert_array_equal(g.quaternions, f.quaternions)
        assert g.length == f.length

    def test_json_count_mismatch(self):
        data = FrameCurve.constant(4, 1.0).to_json()
        data["N"] = 5
        with pytest.raises(InvalidParameterError):
            FrameCurve.from_json(data)

    @pytest.mark.parametrize("q, length", [(np.ones((2, 4)), 1.0), (np.ones((4, 3)), 1.0),
                                           (np.ones((4, 4)), 0.0), (np.zeros((4, 4)), 1.0)])
    def test_invalid(self, q, length):
        with pytest.raises(InvalidParameterError):
            FrameCurve(q, length)

    def test_quaternions_normalized(self):
        f = FrameCurve(2.0 * np.tile([1.0, 0.0, 0.0, 0.0], (3, 1)), 1.0)
        assert f.orthogonality_error() <= 1e-15


class TestReconstruction:
    def test_zero_strain(self, rng):
        R0 = expm(rng.normal(size=3))
        f = frame_reconstruct(StrainCurve.constant(np.zeros(3), 20, 1.0), R0)
        np.testing.assert_allclose(f.matrices, np.broadcast_to(R0, (21, 3, 3)), atol=1e-14)

    @pytest.mark.parametrize("k", [[0.0, 0.0, 1.3], [0.7, 0.0, 0.0], [0.4, -1.1, 0.9]])
    def test_rodrigues_closed_form(self, k):
        L, N = 2.0, 1000
        f = frame_reconstruct(StrainCurve.constant(k, N, L))
        i = np.arange(0, N + 1, 50)
        expected = rodrigues(np.outer(i * L / N, k))
        np.testing.assert_allclose(f.matrices[i], expected, atol=1e-10)

    def test_twist_rotates_about_e1(self):
        tau, L = 0.8, 1.5
        f = frame_reconstruct(StrainCurve.constant([tau, 0.0, 0.0], 100, L))
        c, s = math.cos(tau * L), math.sin(tau * L)
        np.testing.assert_allclose(f.matrices[-1], [[1, 0, 0], [0, c, -s], [0, s, c]], atol=1e-12)

    def test_orthogonality_drift(self):
        rng = np.random.default_rng(0)
        k = rng.normal(size=(1_000_000, 3))
        f = frame_reconstruct(StrainCurve(k, 1000.0))
        assert f.orthogonality_error() <= 1e-9

    def test_second_order_for_smooth_strain(self):
        def run(N):
            t = (np.arange(N) + 0.5) / N
            k = np.stack([np.sin(3 * t), np.cos(2 * t), t], axis=1)
            return frame_reconstruct(StrainCurve(k, 1.0)).matrices[-1]

        e1 = np.abs(run(40) - run(1280)).max()
        e2 = np.abs(run(80) - run(1280)).max()
        assert e1 / e2 > 3.0

    @given(arrays(float, (12, 3), elements=st.floats(-2, 2)))
    def test_round_trip(self, k):
        back = strain_of(frame_reconstruct(StrainCurve(k, 1.0)))
        np.testing.assert_allclose(back.axial, k, atol=1e-10)

    def test_round_trip_at_n_1000(self, rng):
        k = rng.uniform(-2, 2, size=(1000, 3))
        np.testing.assert_allclose(strain_of(frame_reconstruct(StrainCurve(k, 3.0))).axial, k, atol=1e-10)

    def test_quarter_turn_log(self):
        f = FrameCurve.from_matrices(np.stack([np.eye(3), expm([0.0, 0.0, math.pi / 2]), np.eye(3)]), 2.0)
        np.testing.assert_allclose(strain_of(f).axial[0], [0.0, 0.0, math.pi / 2], atol=1e-14)

    def test_half_turn_is_ambiguous(self):
        f = FrameCurve.from_matrices(np.stack([np.eye(3), expm([0.0, math.pi, 0.0]), np.eye(3)]), 2.0)
        with pytest.raises(ResolutionError):
            strain_of(f)

    def test_rejects_non_rotation_start(self):
        with pytest.raises(InvalidParameterError):
            frame_reconstruct(StrainCurve.constant(np.zeros(3), 4, 1.0), 2.0 * np.eye(3))

    @given(vec3, vec3)
    def test_left_invariance(self, k, v):
        S = StrainCurve(np.tile(k, (10, 1)) + np.linspace(0, 1, 10)[:, None], 1.0)
        Q = expm(v)
        a = frame_reconstruct(S)
        b = frame_reconstruct(S, Q)
        np.testing.assert_allclose(b.matrices, Q @ a.matrices, atol=1e-12)
        np.testing.assert_allclose(strain_of(b).axial, strain_of(a).axial, atol=1e-10)
        stiff = EffectiveStiffness.from_matrix(np.diag([1.0, 2.0, 3.0, 4.0]))
        assert rod_energy(b, stiff) == pytest.approx(rod_energy(a, stiff), rel=1e-12, abs=1e-12)


class TestEnergy:
    def test_zero(self, iso_stiff):
        assert rod_energy(FrameCurve.constant(8, 1.0), iso_stiff) == 0.0

    def test_constant_strain(self, iso_stiff, rng):
        k = rng.normal(size=3)
        L = 1.7
        f = frame_reconstruct(StrainCurve.constant(k, 50, L))
        assert rod_energy(f, iso_stiff) == pytest.approx(L * iso_stiff.q0(axial_to_coords(k)), rel=1e-12)

    def test_arc_in_bending_coordinate(self, iso_stiff):
        kappa, L = 0.9, 2.0
        geo = iso_stiff.geometry
        f = frame_reconstruct(StrainCurve.constant([0.0, 0.0, -kappa], 64, L))   # A12 = kappa
        E = youngs_modulus(0.5, 1.0)
        assert rod_energy(f, iso_stiff) == pytest.approx(L * E * geo.mu2 * kappa**2, rel=1e-2)

    def test_piecewise_constant_quadrature(self, rng):
        k = rng.normal(size=(30, 3))
        S = StrainCurve(k, 3.0)
        stiffs = [EffectiveStiffness.from_matrix(_spd(rng)) for _ in range(30)]
        direct = sum(0.1 * s.q0(axial_to_coords(ki)) for s, ki in zip(stiffs, k))
        assert rod_energy(frame_reconstruct(S), stiffs) == pytest.approx(direct, rel=1e-12)

    def test_callable_stiffness(self, iso_stiff):
        f = frame_reconstruct(StrainCurve.constant([0.1, 0.2, 0.3], 10, 1.0))
        assert rod_energy(f, lambda x: iso_stiff) == pytest.approx(rod_energy(f, iso_stiff), rel=1e-14)

    def test_wrong_stiffness_count(self, iso_stiff):
        with pytest.raises(InvalidParameterError):
            axial_stiffness([iso_stiff] * 3, np.zeros(5))


def _spd(rng):
    B = rng.normal(size=(4, 4))
    return B @ B.T + np.eye(4)


class TestMinimize:
    def test_clamped_identity_is_zero(self, iso_stiff):
        sol = minimize_rod(iso_stiff, n=32, R_end=np.eye(3))
        assert sol.energy == 0.0
        assert sol.frame.orthogonality_error() <= 1e-12

    @pytest.mark.parametrize("theta, L", [(0.5, 1.0), (1.2, 2.0)])
    def test_clamped_bend_constant_strain(self, iso_stiff, theta, L):
        R_end = expm([0.0, 0.0, theta])
        rng = np.random.default_rng(1)
        q = slerp_guess(R_end, 64, L)
        noise = rng.normal(scale=0.05, size=(63, 3))
        q[1:-1] = np.array([matrix_to_quat(FrameCurve(q, L).matrices[i + 1] @ expm(noise[i])) for i in range(63)])
        sol = minimize_rod(iso_stiff, initial=FrameCurve(q, L), R_end=R_end)
        stiffness = iso_stiff.Q0[0, 0]
        assert sol.energy == pytest.approx(stiffness * theta**2 / L, rel=1e-4)
        np.testing.assert_allclose(strain_of(sol.frame).axial, np.tile([0.0, 0.0, theta / L], (64, 1)), atol=1e-4)
        assert sol.monotone

    def test_clamped_twist(self, iso_stiff):
        theta = 0.5
        sol = minimize_rod(iso_stiff, n=48, R_end=expm([theta, 0.0, 0.0]))
        assert sol.energy == pytest.approx(iso_stiff.Q0[2, 2] * theta**2, rel=1e-4)
        assert sol.monotone

    def test_anisotropic_competitor(self, rect_stiff):
        n = np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
        theta, L = 2.0, 1.0
        sol = minimize_rod(rect_stiff, n=64, length=L, R_end=expm(theta * n))
        naive = L * rect_stiff.q0(axial_to_coords(theta * n / L))
        assert sol.energy < naive * (1 - 1e-4)
        assert sol.monotone

    def test_end_moment(self, iso_stiff):
        m = np.array([0.0, 0.0, 0.2])
        sol = minimize_rod(iso_stiff, n=32, end_moment=m)
        K = iso_stiff.Q0[0, 0]
        k_expected = 0.2 / (2 * K)
        np.testing.assert_allclose(strain_of(sol.frame).axial[:, 2], k_expected, rtol=1e-5)

    def test_rejects_short(self, iso_stiff):
        with pytest.raises(InvalidParameterError):
            minimize_rod(iso_stiff, n=8)

    def test_rejects_moment_with_clamped_end(self, iso_stiff):
        with pytest.raises(InvalidParameterError):
            minimize_rod(iso_stiff, R_end=np.eye(3), end_moment=np.ones(3))

    def test_convergence_error_carries_best(self, iso_stiff):
        from rodhomog.errors import ConvergenceError

        with pytest.raises(ConvergenceError) as err:
            minimize_rod(iso_stiff, n=32, R_end=expm([0.3, 0.2, 0.1]), max_iter=1)
        assert isinstance(err.value.best, FrameCurve)


def slerp_guess(R_end, n, L):
    q = slerp(matrix_to_quat(np.eye(3)), matrix_to_quat(R_end), np.linspace(0, 1, n + 1))
    return np.array(q)
