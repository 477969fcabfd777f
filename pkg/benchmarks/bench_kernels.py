"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Prints one line per kernel with the best-of-``repeat`` wall time for each
backend, the speedup, and the max difference between their outputs.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from rodhomog import _fallback
from rodhomog.cross_section import build_primitive
from rodhomog.fem2d import stiffness_matrix

try:
    from rodhomog import _kernels
except ImportError:  # extension not built
    _kernels = None


def _cases(scale):
    rng = np.random.default_rng(0)
    n = int(200_000 * scale)
    omega = rng.normal(size=(n, 3))
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    q = _fallback.quat_chain(q0, omega, 1e-3)

    mesh = build_primitive("disc", [1.0], int(20_000 * scale))
    verts = np.ascontiguousarray(mesh.vertices)
    tris = np.ascontiguousarray(mesh.triangles, dtype=np.int64)

    K = stiffness_matrix(mesh).tocsr()
    K.sort_indices()
    b = rng.normal(size=K.shape[0])
    b -= b.mean()
    Z = np.ones((1, K.shape[0])) / np.sqrt(K.shape[0])
    dinv = 1.0 / K.diagonal()
    csr = (K.indptr.astype(np.int32), K.indices.astype(np.int32), K.data)

    m = int(500_000 * scale)
    F = np.eye(3) + 0.3 * rng.normal(size=(m, 3, 3))
    mu = np.ones(m)
    lam = np.full(m, 0.5)

    return {
        "quat_chain": lambda k: k.quat_chain(q0, omega, 1e-3),
        "quat_chain_log": lambda k: k.quat_chain_log(q),
        "p1_gradients": lambda k: k.p1_gradients(verts, tris),
        "deflated_pcg": lambda k: k.deflated_pcg(*csr, b, Z, dinv, 1e-10, 10 * K.shape[0])[0],
        "iso_energy_density": lambda k: k.iso_energy_density(F, mu, lam, 2.0 * mu),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="problem size multiplier")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    print(f"{'kernel':<20} {'cython [s]':>11} {'python [s]':>11} {'speedup':>8} {'max diff':>10}")
    for name, fn in _cases(args.scale).items():
        tc = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        diff = _max_diff(fn(_kernels), fn(_fallback))
        print(f"{name:<20} {tc:11.4f} {tp:11.4f} {tp / tc:8.1f} {diff:10.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
