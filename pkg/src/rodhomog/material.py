"""Elastic material laws: quadratic forms and nonlinear stored energies.

Positions are points ``x = (x1, x2, x3)`` of the rescaled rod domain.  A
quadratic law stores ``L(x)`` as a 9x9 matrix acting on row-major
``vec(G)``; a nonlinear law pairs a stored energy ``W(x, F)`` with its
quadratic expansion at the identity.

The shipped nonlinear law is a Saint-Venant-Kirchhoff type energy::

    W(F) = mu/2 |F^T F - I|^2 + lam/4 (tr(F^T F - I))^2 + 2 mu min(det F, 0)^2

whose expansion is ``Q(G) = 2 mu |sym G|^2 + lam (tr G)^2``.  The last
term only acts on orientation-reversing ``F``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ._backend import kernels
from .errors import (
    InvalidParameterError,
    MaterialConfigError,
    MaterialNotFoundError,
    UnsupportedMaterialError,
)

WELL_RADIUS = 0.01
AXES = {"x1": 0, "x2": 1, "x3": 2}


def _positions(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise InvalidParameterError(f"positions must have trailing dimension 3, got {x.shape}")
    return x


def sym(G):
    G = np.asarray(G, dtype=float)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def isotropic_tensor(lam, mu):
    """9x9 matrix of ``G -> 2 mu sym G + lam tr(G) I`` on row-major ``vec(G)``."""
    I = np.eye(3)
    L = mu * (np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I))
    L += lam * np.einsum("ij,kl->ijkl", I, I)
    return L.reshape(9, 9)


def dist_so3(F):
    """Frobenius distance from ``F`` to SO(3), batched over leading axes."""
    F = np.asarray(F, dtype=float)
    s = np.linalg.svd(F, compute_uv=False)
    sign = np.sign(np.linalg.det(F))
    s = s.copy()
    s[..., -1] *= np.where(sign == 0, 1.0, sign)
    return np.sqrt(np.sum((s - 1.0) ** 2, axis=-1))


class QuadraticLaw:
    """Pointwise quadratic form ``Q(x, G) = L(x) G . G``.

    Parameters
    ----------
    tensor_fn : callable
        Maps positions ``(..., 3)`` to tensors ``(..., 9, 9)``.
    eta1, eta2 : float
        Constants with ``eta1 |sym G|^2 <= Q(x, G) <= eta2 |sym G|^2``.
    x1_independent : bool
        Whether ``L`` ignores ``x1``.
    """

    def __init__(self, tensor_fn: Callable, eta1: float, eta2: float, *,
                 x1_independent: bool = True, name: str = "custom", params: dict | None = None):
        if not 0 < eta1 <= eta2:
            raise InvalidParameterError(f"need 0 < eta1 <= eta2, got {eta1}, {eta2}")
        self._tensor_fn = tensor_fn
        self.eta1 = float(eta1)
        self.eta2 = float(eta2)
        self.x1_independent = bool(x1_independent)
        self.name = name
        self.params = dict(params or {})

    @classmethod
    def homogeneous(cls, L, eta1=None, eta2=None, name="homogeneous"):
        """Constant law; bounds default to the extreme eigenvalues on symmetric matrices."""
        L = np.array(L, dtype=float).reshape(9, 9)
        if not np.allclose(L, L.T, rtol=0, atol=1e-12 * max(1.0, abs(L).max())):
            raise InvalidParameterError("tensor is not symmetric")
        if eta1 is None or eta2 is None:
            ev = np.linalg.eigvalsh(_sym_basis().T @ L @ _sym_basis())
            eta1 = ev[0] if eta1 is None else eta1
            eta2 = ev[-1] if eta2 is None else eta2
        L.flags.writeable = False

        def fn(x):
            return np.broadcast_to(L, np.shape(x)[:-1] + (9, 9))

        return cls(fn, eta1, eta2, name=name)

    def tensor(self, x):
        return np.asarray(self._tensor_fn(_positions(x)), dtype=float)

    def stress(self, x, G):
        """``L(x) G`` as a 3x3 matrix."""
        G = np.asarray(G, dtype=float)
        v = np.einsum("...ij,...j->...i", self.tensor(x), G.reshape(G.shape[:-2] + (9,)))
        return v.reshape(G.shape)

    def __call__(self, x, G):
        G = np.asarray(G, dtype=float)
        return np.einsum("...ij,...ij->...", self.stress(x, G), G)

    def require_x1_independent(self, samples=32, seed=0):
        """Raise if ``L`` varies with ``x1``, by flag or on random samples."""
        if not self.x1_independent:
            raise UnsupportedMaterialError(f"law '{self.name}' depends on x1")
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, (samples, 3))
        y = x.copy()
        y[:, 0] = rng.uniform(-10, 10, samples)
        if not np.allclose(self.tensor(x), self.tensor(y), rtol=1e-12, atol=0):
            raise UnsupportedMaterialError(f"law '{self.name}' varies with x1 on samples")

    def __repr__(self):
        return f"QuadraticLaw({self.name}, eta1={self.eta1:g}, eta2={self.eta2:g})"


def _sym_basis():
    """Orthonormal basis (as columns of a 9x6 matrix) of symmetric 3x3 matrices."""
    cols = []
    for i in range(3):
        for j in range(i, 3):
            E = np.zeros((3, 3))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            cols.append(E.ravel())
    return np.array(cols).T


class NonlinearLaw:
    """Stored energy ``W(x, F)`` with its quadratic expansion at the identity.

    Parameters
    ----------
    density : callable
        ``density(x, F)`` with positions ``(n, 3)`` and gradients ``(n, 3, 3)``.
    quadratic : QuadraticLaw
        Expansion ``Q`` with ``W(x, I + G) = Q(x, G) + o(|G|^2)``.
    eta1, eta2, well_radius : float
        Class constants: ``W >= eta1 dist^2`` everywhere and
        ``W <= eta2 dist^2`` where ``dist^2 <= well_radius``.
    """

    def __init__(self, density: Callable, quadratic: QuadraticLaw, eta1: float, eta2: float,
                 well_radius: float = WELL_RADIUS, name: str = "custom", params: dict | None = None):
        self._density = density
        self.quadratic = quadratic
        self.eta1 = float(eta1)
        self.eta2 = float(eta2)
        self.well_radius = float(well_radius)
        self.name = name
        self.params = dict(params or {})

    @property
    def x1_independent(self):
        return self.quadratic.x1_independent

    def __call__(self, x, F):
        F = np.asarray(F, dtype=float)
        shape = F.shape[:-2]
        Fb = F.reshape(-1, 3, 3)
        xb = np.broadcast_to(_positions(x), shape + (3,)).reshape(-1, 3)
        return np.asarray(self._density(xb, Fb), dtype=float).reshape(shape)

    def __repr__(self):
        return f"NonlinearLaw({self.name}, eta1={self.eta1:g}, eta2={self.eta2:g}, rho={self.well_radius:g})"


# ---------------------------------------------------------------- constructors

def isotropic_constants(lam, mu, rho=WELL_RADIUS):
    """Class constants ``(eta1, eta2)`` of the shipped isotropic energy."""
    r = math.sqrt(rho)
    # inf W / dist^2 is about 0.2007 mu (at lam = 0, near F = -0.73 I)
    eta1 = mu / 8.0
    eta2 = 0.5 * mu * (2.0 + r) ** 2 + 0.25 * lam * (2.0 * math.sqrt(3.0) + r) ** 2
    return eta1, eta2


def youngs_modulus(lam, mu):
    """Uniaxial modulus of ``Q(G) = 2 mu |sym G|^2 + lam (tr G)^2``.

    With this normalization ``min_{s,t} Q(diag(1, s, t)) = E``, where
    ``E = mu (3 lam + 2 mu) / (lam + mu)``.
    """
    return mu * (3.0 * lam + 2.0 * mu) / (lam + mu)


def _lame_density(mu_fn, lam_fn):
    def density(x, F):
        mu = np.ascontiguousarray(mu_fn(x), dtype=float)
        lam = np.ascontiguousarray(lam_fn(x), dtype=float)
        W, _ = kernels.iso_energy_density(np.ascontiguousarray(F, dtype=float), mu, lam, 2.0 * mu)
        return W

    return density


def make_isotropic(lam: float, mu: float, rho: float = WELL_RADIUS) -> NonlinearLaw:
    """Homogeneous isotropic law with Lame constants ``lam >= 0``, ``mu > 0``."""
    lam, mu = float(lam), float(mu)
    if not (mu > 0 and lam >= 0 and math.isfinite(lam) and math.isfinite(mu)):
        raise InvalidParameterError(f"need mu > 0 and lambda >= 0, got mu={mu}, lambda={lam}")
    if not rho > 0:
        raise InvalidParameterError(f"well radius must be positive, got {rho}")
    eta1, eta2 = isotropic_constants(lam, mu, rho)
    L = isotropic_tensor(lam, mu)
    L.flags.writeable = False
    params = {"kind": "isotropic", "lambda": lam, "mu": mu}
    quad = QuadraticLaw(lambda x: np.broadcast_to(L, x.shape[:-1] + (9, 9)), eta1, eta2,
                        name=f"isotropic(lambda={lam:g}, mu={mu:g})", params=params)
    quad.lame = lambda x: (np.full(x.shape[:-1], mu), np.full(x.shape[:-1], lam))
    dens = _lame_density(lambda x: np.full(len(x), mu), lambda x: np.full(len(x), lam))
    law = NonlinearLaw(dens, quad, eta1, eta2, rho, name=quad.name, params=params)
    law.lame = quad.lame
    return law


def _indicator_compose(mask_fn, a, b, name, x1_independent, params):
    """Law equal to ``a`` where ``mask_fn(x)`` holds and to ``b`` elsewhere."""
    qa = a.quadratic if isinstance(a, NonlinearLaw) else a
    qb = b.quadratic if isinstance(b, NonlinearLaw) else b

    def tensor(x):
        m = mask_fn(x)
        return np.where(m[..., None, None], qa.tensor(x), qb.tensor(x))

    quad = QuadraticLaw(tensor, min(qa.eta1, qb.eta1), max(qa.eta2, qb.eta2),
                        x1_independent=x1_independent and qa.x1_independent and qb.x1_independent,
                        name=name, params=params)
    if hasattr(qa, "lame") and hasattr(qb, "lame"):
        def lame(x):
            m = mask_fn(x)
            (ma, la), (mb, lb) = qa.lame(x), qb.lame(x)
            return np.where(m, ma, mb), np.where(m, la, lb)

        quad.lame = lame
    if not (isinstance(a, NonlinearLaw) and isinstance(b, NonlinearLaw)):
        return quad

    def density(x, F):
        m = mask_fn(x)
        out = np.empty(len(x))
        if m.any():
            out[m] = a(x[m], F[m])
        if (~m).any():
            out[~m] = b(x[~m], F[~m])
        return out

    law = NonlinearLaw(density, quad, min(a.eta1, b.eta1), max(a.eta2, b.eta2),
                       min(a.well_radius, b.well_radius), name=name, params=params)
    if hasattr(quad, "lame"):
        law.lame = quad.lame
    return law


def make_laminate(phase_a, phase_b, direction: str = "x2", period: float = 1.0,
                  volume_fraction: float = 0.5):
    """Two-phase layered law along ``direction``.

    ``L(x) = L_a`` where ``frac(x_dir / period) < volume_fraction``, else
    ``L_b``.  Returns a :class:`NonlinearLaw` when both phases are
    nonlinear, otherwise a :class:`QuadraticLaw`.
    """
    if direction not in AXES:
        raise InvalidParameterError(f"direction must be one of {sorted(AXES)}, got {direction!r}")
    if not period > 0:
        raise InvalidParameterError(f"period must be positive, got {period}")
    if not 0 < volume_fraction <= 1:
        raise InvalidParameterError(f"volume fraction must lie in (0, 1], got {volume_fraction}")
    k, p, th = AXES[direction], float(period), float(volume_fraction)

    def mask(x):
        t = x[..., k] / p
        return (t - np.floor(t)) < th

    params = {"kind": "laminate", "direction": direction, "period": p, "fraction": th,
              "phase_a": phase_a.params if hasattr(phase_a, "params") else {},
              "phase_b": phase_b.params if hasattr(phase_b, "params") else {}}
    return _indicator_compose(mask, phase_a, phase_b, f"laminate({direction}, {p:g}, {th:g})",
                              direction != "x1", params)


def make_checkerboard(phase_a, phase_b, period: float = 1.0, axes: tuple = ("x2", "x3")):
    """Checkerboard of square cells of side ``period / 2`` in the given axes."""
    if not period > 0:
        raise InvalidParameterError(f"period must be positive, got {period}")
    if len(axes) != 2 or any(a not in AXES for a in axes) or axes[0] == axes[1]:
        raise InvalidParameterError(f"axes must be two distinct names from {sorted(AXES)}")
    i, j = AXES[axes[0]], AXES[axes[1]]
    half = 0.5 * float(period)

    def mask(x):
        n = np.floor(x[..., i] / half) + np.floor(x[..., j] / half)
        return np.mod(n, 2) == 0

    params = {"kind": "checkerboard", "period": float(period), "axes": list(axes),
              "phase_a": getattr(phase_a, "params", {}), "phase_b": getattr(phase_b, "params", {})}
    return _indicator_compose(mask, phase_a, phase_b, f"checkerboard({period:g})",
                              "x1" not in axes, params)


# ---------------------------------------------------------------- admissibility

@dataclass
class AxiomResult:
    passed: bool
    worst: float
    detail: str = ""


@dataclass
class AdmissibilityReport:
    results: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.results.values())

    def __getitem__(self, key):
        return self.results[key]

    def summary(self):
        return {k: {"passed": r.passed, "worst": r.worst, "detail": r.detail}
                for k, r in self.results.items()}


def random_rotations(rng, n):
    """Uniformly distributed rotation matrices via unit quaternions."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], axis=1)


def _sample_gradients(rng, n):
    """Mixture of generic, near-rotation, stretched and reflected gradients."""
    k = n // 5
    m = n - 4 * k
    R = random_rotations(rng, 4 * k)
    flip = np.diag([1.0, 1.0, -1.0])
    generic = rng.normal(size=(m, 3, 3)) * rng.choice([0.1, 1.0, 3.0], size=(m, 1, 1))
    near = R[:k] @ (np.eye(3) + 0.05 * rng.normal(size=(k, 3, 3)))
    stretch = R[k:2 * k] @ (np.eye(3) * rng.uniform(0.0, 2.0, size=(k, 3, 1)))
    refl = R[2 * k:3 * k] @ flip @ (np.eye(3) + 0.3 * rng.normal(size=(k, 3, 3)))
    scaled = R[3 * k:] @ flip * rng.uniform(0.0, 1.5, size=(k, 1, 1))
    return np.concatenate([generic, near, stretch, refl, scaled])


def check_admissible(law: NonlinearLaw, samples: int = 1000, seed: int = 0,
                     box: float = 1.0) -> AdmissibilityReport:
    """Check the four material axioms of a nonlinear law on random samples.

    (W1) frame indifference, (W2) two-sided comparison with ``dist^2`` to
    SO(3), (W3) ``W = 0`` on rotations, (W4) quadratic expansion on the
    ladder ``eps in {1e-2, 1e-3, 1e-4}``.  Positions are drawn from
    ``[-box, box]^3``.
    """
    if samples < 10:
        raise InvalidParameterError(f"need at least 10 samples, got {samples}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, (samples, 3))
    report = AdmissibilityReport()

    # (W1)
    F = _sample_gradients(rng, samples)
    R = random_rotations(rng, samples)
    W0 = law(x, F)
    W1 = law(x, R @ F)
    viol = np.abs(W1 - W0) / np.maximum(1.0, np.abs(W0))
    worst = float(viol.max())
    report.results["W1"] = AxiomResult(worst <= 1e-10, worst, "max |W(RF) - W(F)| / max(1, W)")

    # (W2) lower bound everywhere, upper bound inside the well
    d2 = dist_so3(F) ** 2
    low = law.eta1 * d2 - W0
    Fw = R @ (np.eye(3) + sym(rng.normal(size=(samples, 3, 3))))
    scale = math.sqrt(law.well_radius) * rng.uniform(0, 1, samples) / np.maximum(dist_so3(Fw), 1e-300)
    Fw = R @ (np.eye(3) + scale[:, None, None] * (R.transpose(0, 2, 1) @ Fw - np.eye(3)))
    dw2 = dist_so3(Fw) ** 2
    inside = dw2 <= law.well_radius
    high = np.where(inside, law(x, Fw) - law.eta2 * dw2, -np.inf)
    slack = 1e-12 * np.maximum(1.0, np.abs(W0))
    worst = float(max(np.max(low - slack), np.max(high) - 1e-12))
    report.results["W2"] = AxiomResult(
        bool(worst <= 0.0 and np.all(np.isfinite(W0))), max(worst, 0.0),
        "eta1 dist^2 <= W everywhere; W <= eta2 dist^2 inside the well")

    # (W3)
    WI = np.abs(law(x, np.broadcast_to(np.eye(3), (samples, 3, 3))))
    WR = np.abs(law(x, R))
    worst = float(max(WI.max(), WR.max()))
    report.results["W3"] = AxiomResult(worst <= 1e-12, worst, "W(I) = W(R) = 0")

    # (W4)
    G = rng.normal(size=(samples, 3, 3))
    Q = law.quadratic(x, G)
    ladder = (1e-2, 1e-3, 1e-4)
    ratios = np.array([
        np.abs(law(x, np.eye(3) + e * G) - law.quadratic(x, e * G)) / e**2 for e in ladder
    ])
    ref = np.maximum(np.abs(Q), np.sum(G * G, axis=(1, 2)))
    # the expansion modulus is a supremum over directions, so compare worst cases
    sup = (ratios / ref).max(axis=1)
    floor = 1e-9
    decreasing = bool(np.all((sup[1:] < sup[:-1]) | (sup[1:] <= floor)))
    ok = decreasing and sup[-1] <= 1e-2
    report.results["W4"] = AxiomResult(
        ok, float(sup[-1]),
        "sup |W(I + eG) - Q(eG)| / (e^2 |G|^2) decreasing on the eps ladder: "
        + ", ".join(f"{r:.2e}" for r in sup))
    return report


# ---------------------------------------------------------------- config files

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S.*?)\s*$")
_SECTION = re.compile(r"^\s*\[\s*([A-Za-z_]+)\s*\]\s*$")
_TOP_KEYS = {"kind", "lambda", "mu", "direction", "period", "fraction", "axes", "well_radius"}
_PHASE_KEYS = {"kind", "lambda", "mu"}


def parse_material_config(text: str, source: str = "<string>"):
    """Parse the key-value material format into a :class:`NonlinearLaw`."""
    blocks: dict[str, dict] = {"": {}}
    lines: dict[tuple, int] = {}
    current = ""
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            current = m.group(1)
            if current not in ("phase_a", "phase_b"):
                raise MaterialConfigError(f"{source}:{n}: unknown block [{current}]")
            if current in blocks:
                raise MaterialConfigError(f"{source}:{n}: duplicate block [{current}]")
            blocks[current] = {}
            continue
        m = _LINE.match(line)
        if not m:
            raise MaterialConfigError(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = m.group(1), m.group(2)
        allowed = _TOP_KEYS if current == "" else _PHASE_KEYS
        if key not in allowed:
            raise MaterialConfigError(f"{source}:{n}: unknown key {key!r}")
        if key in blocks[current]:
            raise MaterialConfigError(f"{source}:{n}: duplicate key {key!r}")
        blocks[current][key] = value
        lines[(current, key)] = n

    def num(block, key, default=None):
        if key not in blocks[block]:
            if default is None:
                where = f"[{block}]" if block else "top level"
                raise MaterialConfigError(f"{source}: missing key {key!r} in {where}")
            return default
        try:
            v = float(blocks[block][key])
        except ValueError:
            raise MaterialConfigError(
                f"{source}:{lines[(block, key)]}: {key} must be a decimal number") from None
        if not math.isfinite(v):
            raise MaterialConfigError(f"{source}:{lines[(block, key)]}: {key} must be finite")
        return v

    def iso(block, rho):
        kind = blocks[block].get("kind", "isotropic")
        if kind != "isotropic":
            raise MaterialConfigError(f"{source}: phase kind must be isotropic, got {kind!r}")
        try:
            return make_isotropic(num(block, "lambda"), num(block, "mu"), rho)
        except InvalidParameterError as exc:
            raise MaterialConfigError(f"{source}: [{block or 'top level'}] {exc}") from None

    top = blocks[""]
    kind = top.get("kind")
    if kind is None:
        raise MaterialConfigError(f"{source}: missing key 'kind'")
    rho = num("", "well_radius", WELL_RADIUS)
    if kind == "isotropic":
        extra = set(blocks) - {""}
        if extra:
            raise MaterialConfigError(f"{source}: isotropic material takes no phase blocks")
        return iso("", rho)
    if kind not in ("laminate", "checkerboard"):
        raise MaterialConfigError(f"{source}:{lines[('', 'kind')]}: unknown kind {kind!r}")
    for ph in ("phase_a", "phase_b"):
        if ph not in blocks:
            raise MaterialConfigError(f"{source}: {kind} needs a [{ph}] block")
    a, b = iso("phase_a", rho), iso("phase_b", rho)
    try:
        if kind == "laminate":
            return make_laminate(a, b, top.get("direction", "x2"), num("", "period"),
                                 num("", "fraction", 0.5))
        axes = tuple(s.strip() for s in top.get("axes", "x2, x3").split(","))
        return make_checkerboard(a, b, num("", "period"), axes)
    except InvalidParameterError as exc:
        raise MaterialConfigError(f"{source}: {exc}") from None


def load_material(path) -> NonlinearLaw:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise MaterialNotFoundError(f"material file not found: {path}") from None
    return parse_material_config(text, source=str(path))
