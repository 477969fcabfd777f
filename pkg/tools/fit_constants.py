"""Seeded sweeps behind the constants frozen in ``tests/frozen.py``.

Usage::

    python3 tools/fit_constants.py [griso|lipschitz|omega|rigidity|laminate ...]

Each sweep prints the worst observed ratio. The frozen values are set about
a factor two above these numbers and are not refitted by the test suite.
"""

from __future__ import annotations

import sys
import time
import warnings

import numpy as np

from rodhomog.cross_section import build_primitive, normalize_axes, refine
from rodhomog.effective_stiffness import StrainLoad, ThinRodCell, effective_matrix
from rodhomog.material import make_isotropic, make_laminate, youngs_modulus
from rodhomog.probe3d import build_recovery, griso_norms, griso_residual, random_displacement, rigidity_diagnostic
from rodhomog.rod_model import StrainCurve, frame_reconstruct
from rodhomog.so3 import axial_to_coords


def _section(kind, params, res):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return normalize_axes(build_primitive(kind, params, res))


def griso():
    mesh, _ = _section("disc", [1.0], 200)
    x1 = np.linspace(0.0, 1.0, 41)
    for h in (0.4, 0.2, 0.1, 0.05, 0.025):
        rng = np.random.default_rng(2)
        worst, res = np.zeros(2), 0.0
        for _ in range(60):
            u = random_displacement(mesh, x1, h, rng)
            worst = np.maximum(worst, griso_norms(u).ratios())
            res = max(res, griso_residual(u))
        print(f"griso h={h:<6} rod parts {worst[0]:.3f}  remainder {worst[1]:.3f}  residual {res:.1e}")


def lipschitz():
    mesh, _ = _section("disc", [1.0], 200)
    law = make_isotropic(0.5, 1.0)
    rng = np.random.default_rng(3)
    for h in (0.2, 0.1):
        t = time.time()
        cell = ThinRodCell(mesh, law, h)
        worst = 0.0
        for _ in range(50):
            m1, m2 = rng.normal(size=4), rng.normal(size=4)
            d = abs(cell.energy(m1) - cell.energy(m2))
            worst = max(worst, d / (np.linalg.norm(m1 - m2) * (np.linalg.norm(m1) + np.linalg.norm(m2))))
        print(f"lipschitz h={h}: {worst:.3f} ({time.time() - t:.1f} s)")
    st = effective_matrix(mesh, law)
    print(f"largest eigenvalue of M: {np.linalg.eigvalsh(st.M)[-1]:.3f}")


def omega():
    mesh, _ = _section("disc", [1.0], 200)
    st = effective_matrix(mesh, make_isotropic(0.5, 1.0))
    rng = np.random.default_rng(3)
    c = rng.normal(size=(1000, 4))
    r = np.einsum("ni,ij,nj->n", c, st.M, c) / (c[:, 0] ** 2 + 2 * np.sum(c[:, 1:] ** 2, axis=1))
    print(f"C_omega: min ratio {r.min():.4f}")


def rigidity():
    mesh, _ = _section("disc", [1.0], 200)
    st = effective_matrix(mesh, make_isotropic(0.5, 1.0), keep_correctors=True)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        k = rng.normal(size=3)
        k *= rng.uniform(0.5, 2.5) / np.linalg.norm(k)
        frame = frame_reconstruct(StrainCurve.constant(k, 60, 1.0))
        c = axial_to_coords(k)
        for h in (0.2, 0.1, 0.05):
            y = build_recovery(frame, mesh, h, st.a_min(c), st)
            worst = max(worst, rigidity_diagnostic(y)[2] / h)
    print(f"rigidity: worst gap / h {worst:.3f}")


def laminate():
    lam = make_laminate(make_isotropic(0.0, 1.0), make_isotropic(0.0, 2.0), "x2", 0.1, 0.5)
    mesh, geo = _section("rectangle", [1.0, 1.0], 800)
    base = effective_matrix(mesh, lam).Q0
    fine = effective_matrix(refine(refine(mesh)), lam).Q0
    Ea, Eb = youngs_modulus(0, 1), youngs_modulus(0, 2)
    print("laminate diag Q0", np.diag(base), "refined", np.diag(fine))
    print("bracket", geo.mu2 / (0.5 / Ea + 0.5 / Eb), geo.mu2 * 0.5 * (Ea + Eb))


SWEEPS = {"griso": griso, "lipschitz": lipschitz, "omega": omega, "rigidity": rigidity,
          "laminate": laminate}

if __name__ == "__main__":
    for name in sys.argv[1:] or SWEEPS:
        SWEEPS[name]()
