"""Triangulated cross-sections: construction, I/O, principal axes.

Coordinates of the section plane are called ``(x2, x3)`` throughout, the
rod axis being ``x1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, cKDTree

from ._backend import kernels
from .errors import InvalidParameterError, MeshFormatError, MeshInvalidError, MeshNotFoundError

DUPLICATE_TOL = 1e-12
MIN_ANGLE_WARN_DEG = 20.0
NORMALIZATION_TOL = 1e-10


class MeshQualityWarning(UserWarning):
    pass


def _readonly(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh2D:
    """Linear triangle mesh of a connected cross-section.

    Construction validates the mesh; every triangle must already be
    counter-clockwise (use :func:`load_mesh` or ``TriMesh2D.oriented`` to
    repair orientation).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    check_quality: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _readonly(self.vertices, np.float64))
        object.__setattr__(self, "triangles", _readonly(self.triangles, np.int64))
        _validate(self.vertices, self.triangles, self.check_quality)

    @classmethod
    def oriented(cls, vertices, triangles, **kw):
        """Build a mesh after flipping clockwise triangles."""
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        _check_indices(vertices, triangles)
        area = _signed_areas(vertices, triangles)
        flip = area < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        return cls(vertices, triangles, **kw)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def areas(self):
        return _signed_areas(self.vertices, self.triangles)

    @property
    def area(self):
        return float(self.areas.sum())

    @property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def diameter(self):
        pts = self.vertices
        if len(pts) > 3:
            try:
                pts = pts[ConvexHull(pts).vertices]
            except Exception:  # collinear input cannot reach here after validation
                pass
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def gradients(self):
        """``(areas, grads)`` with ``grads[t, a]`` the gradient of the hat of local vertex ``a``."""
        return kernels.p1_gradients(self.vertices, self.triangles)

    def edges(self):
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def boundary_edges(self):
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq[counts == 1]

    def transformed(self, translation=(0.0, 0.0), angle=0.0):
        """Shift by ``translation`` then express in axes rotated by ``angle``."""
        c, s = math.cos(angle), math.sin(angle)
        x = self.vertices + np.asarray(translation, dtype=float)
        rot = np.array([[c, -s], [s, c]])
        return TriMesh2D(x @ rot, self.triangles, check_quality=False)

    def stats(self):
        angles = _min_angles(self.vertices, self.triangles)
        return {
            "vertices": self.n_vertices,
            "triangles": self.n_triangles,
            "area": self.area,
            "diameter": self.diameter,
            "min_angle_deg": float(np.degrees(angles.min())),
        }


@dataclass(frozen=True)
class SectionGeometry:
    """Rigid transform to principal axes plus the section's moments."""

    translation: tuple
    rotation_angle: float
    area: float
    mu2: float
    mu3: float
    diameter: float
    torsion_constant: float | None = None

    @property
    def polar_moment(self):
        return self.mu2 + self.mu3

    def with_torsion_constant(self, value):
        return replace(self, torsion_constant=float(value))

    def as_dict(self):
        return {
            "translation": list(self.translation),
            "rotation_angle": self.rotation_angle,
            "area": self.area,
            "mu2": self.mu2,
            "mu3": self.mu3,
            "diameter": self.diameter,
            "torsion_constant": self.torsion_constant,
        }


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e2[:, 0] * e1[:, 1])


def _min_angles(vertices, triangles):
    p = vertices[triangles]
    out = np.full(len(triangles), np.pi)
    for a in range(3):
        u = p[:, (a + 1) % 3] - p[:, a]
        v = p[:, (a + 2) % 3] - p[:, a]
        cos = (u * v).sum(1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out = np.minimum(out, np.arccos(np.clip(cos, -1.0, 1.0)))
    return out


def _check_indices(vertices, triangles):
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshInvalidError(f"vertices must have shape (n, 2), got {vertices.shape}")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshInvalidError(f"triangles must have shape (m, 3), got {triangles.shape}")
    if len(triangles) == 0:
        raise MeshInvalidError("mesh has no triangles")
    if not np.all(np.isfinite(vertices)):
        raise MeshInvalidError("non-finite vertex coordinates")
    bad = (triangles < 0) | (triangles >= len(vertices))
    if bad.any():
        t = int(np.argwhere(bad)[0, 0])
        raise MeshInvalidError(
            f"triangle {t} references vertex {int(triangles[t][bad[t]][0])}, "
            f"only {len(vertices)} vertices exist"
        )


def _validate(vertices, triangles, check_quality):
    _check_indices(vertices, triangles)
    area = _signed_areas(vertices, triangles)
    if np.any(area <= 0):
        t = int(np.argmin(area))
        raise MeshInvalidError(f"triangle {t} has non-positive signed area {area[t]:.3e}")
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    if not used.all():
        raise MeshInvalidError(f"{int((~used).sum())} vertices are not used by any triangle")
    pairs = cKDTree(vertices).query_pairs(DUPLICATE_TOL)
    if pairs:
        i, j = sorted(pairs)[0]
        raise MeshInvalidError(f"duplicate vertices {i} and {j}")
    # triangles are adjacent when they share an edge
    nt = len(triangles)
    e = np.sort(triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    owner = np.repeat(np.arange(nt), 3)
    key = e[:, 0] * len(vertices) + e[:, 1]
    order = np.argsort(key, kind="stable")
    k, o = key[order], owner[order]
    if np.unique(k, return_counts=True)[1].max() > 2:
        raise MeshInvalidError("an edge is shared by more than two triangles")
    same = k[1:] == k[:-1]
    a, b = o[:-1][same], o[1:][same]
    graph = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(nt, nt))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp != 1:
        raise MeshInvalidError(f"mesh is not connected ({ncomp} components)")
    if check_quality:
        worst = float(np.degrees(_min_angles(vertices, triangles).min()))
        if worst < MIN_ANGLE_WARN_DEG:
            warnings.warn(
                f"minimum triangle angle {worst:.1f} deg below {MIN_ANGLE_WARN_DEG} deg",
                MeshQualityWarning,
                stacklevel=3,
            )


# ---------------------------------------------------------------- quadrature

def edge_midpoints(mesh):
    """Quadrature points ``(nt, 3, 2)`` of the edge-midpoint rule (exact to degree 2)."""
    p = mesh.vertices[mesh.triangles]
    return 0.5 * (p + np.roll(p, -1, axis=1))


def integrate(mesh, f):
    """Integrate ``f(x2, x3)`` with the edge-midpoint rule."""
    q = edge_midpoints(mesh)
    vals = f(q[..., 0], q[..., 1])
    return float((mesh.areas[:, None] * vals).sum() / 3.0)


def raw_moments(mesh):
    """Exact ``(area, S2, S3, I22, I33, I23)`` of the polygonal section."""
    q = edge_midpoints(mesh)
    w = mesh.areas[:, None] / 3.0
    x, y = q[..., 0], q[..., 1]
    return tuple(float((w * v).sum()) for v in (np.ones_like(x), x, y, x * x, y * y, x * y))


def refine(mesh):
    """Uniform red refinement: every triangle split into four."""
    edges = mesh.edges()
    nv = mesh.n_vertices
    lookup = {(int(a), int(b)): nv + k for k, (a, b) in enumerate(edges)}
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])

    def mid(a, b):
        return lookup[(a, b) if a < b else (b, a)]

    tris = []
    for a, b, c in mesh.triangles.tolist():
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return TriMesh2D(np.vstack([mesh.vertices, mids]), np.array(tris), check_quality=False)


# ---------------------------------------------------------------- primitives

def _zipper(inner, outer, n_in_pts, n_out_pts):
    """Triangulate the band between two closed loops sampled at uniform angles."""
    tris = []
    i = j = 0
    while i < n_in_pts or j < n_out_pts:
        next_in = (i + 1) / n_in_pts
        next_out = (j + 1) / n_out_pts
        if j == n_out_pts or (i < n_in_pts and next_in < next_out):
            tris.append((inner[i % n_in_pts], outer[j % n_out_pts], inner[(i + 1) % n_in_pts]))
            i += 1
        else:
            tris.append((inner[i % n_in_pts], outer[j % n_out_pts], outer[(j + 1) % n_out_pts]))
            j += 1
    return tris


def _ring_mesh(radii, counts, center):
    pts = []
    loops = []
    if center:
        pts.append((0.0, 0.0))
    for r, n in zip(radii, counts):
        t = 2 * np.pi * np.arange(n) / n
        start = len(pts)
        pts.extend(zip(r * np.cos(t), r * np.sin(t)))
        loops.append(list(range(start, start + n)))
    tris = []
    if center:
        ring = loops[0]
        n = len(ring)
        tris += [(0, ring[k], ring[(k + 1) % n]) for k in range(n)]
    for a, b in zip(loops[:-1], loops[1:]):
        tris += _zipper(a, b, len(a), len(b))
    return np.array(pts), np.array(tris)


def _disc(radius, resolution):
    rings = max(1, round(math.sqrt(resolution / 6.0)))
    k = np.arange(1, rings + 1)
    return _ring_mesh(radius * k / rings, 6 * k, center=True)


def _rectangle(width, height, resolution):
    nx = max(1, round(math.sqrt(resolution / 2.0 * width / height)))
    ny = max(1, round(resolution / (2.0 * nx)))
    return _grid(
        np.linspace(-width / 2, width / 2, nx + 1),
        np.linspace(-height / 2, height / 2, ny + 1),
        keep=None,
    )


def _grid(xs, ys, keep):
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            if keep is not None and not keep(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])):
                continue
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    tris = np.array(tris)
    used = np.unique(tris)
    remap = np.full(len(pts), -1)
    remap[used] = np.arange(len(used))
    return pts[used], remap[tris]


def _annulus(outer, inner, resolution):
    area = np.pi * (outer**2 - inner**2)
    s = math.sqrt(2.0 * area / resolution)
    layers = max(1, round((outer - inner) / s))
    radii = np.linspace(inner, outer, layers + 1)
    counts = [max(6, round(2 * np.pi * r / s)) for r in radii]
    return _ring_mesh(radii, counts, center=False)


def _l_shape(size, thickness, resolution):
    area = 2 * size * thickness - thickness**2
    s = math.sqrt(2.0 * area / resolution)
    n1 = max(1, round(thickness / s))
    n2 = max(1, round((size - thickness) / s))
    lines = np.concatenate([np.linspace(0, thickness, n1 + 1), np.linspace(thickness, size, n2 + 1)[1:]])
    return _grid(lines, lines, keep=lambda x, y: x < thickness or y < thickness)


PRIMITIVES = {
    "disc": ("radius",),
    "rectangle": ("width", "height"),
    "ellipse": ("a", "b"),
    "annulus": ("outer_radius", "inner_radius"),
    "L-shape": ("size", "thickness"),
}


def build_primitive(kind, params, resolution=1000):
    """Mesh a standard section shape with roughly ``resolution`` triangles.

    Parameters
    ----------
    kind : {'disc', 'rectangle', 'ellipse', 'annulus', 'L-shape'}
    params : sequence of float
        ``disc: (radius,)``, ``rectangle: (width, height)``,
        ``ellipse: (a, b)`` semi-axes along x2 and x3,
        ``annulus: (outer_radius, inner_radius)``,
        ``L-shape: (size, thickness)`` for ``[0,s]x[0,t] U [0,t]x[0,s]``.
    resolution : int
        Target triangle count, at least 8.

    Curved boundaries are replaced by inscribed polygons.
    """
    if kind not in PRIMITIVES:
        raise InvalidParameterError(f"unknown primitive {kind!r}; expected one of {sorted(PRIMITIVES)}")
    params = [float(p) for p in np.atleast_1d(params)]
    names = PRIMITIVES[kind]
    if len(params) != len(names):
        raise InvalidParameterError(f"{kind} takes parameters {names}, got {len(params)} values")
    if not all(math.isfinite(p) and p > 0 for p in params):
        raise InvalidParameterError(f"{kind} dimensions must be positive, got {params}")
    if resolution < 8:
        raise InvalidParameterError(f"resolution must be >= 8, got {resolution}")
    if kind == "disc":
        pts, tris = _disc(params[0], resolution)
    elif kind == "rectangle":
        pts, tris = _rectangle(params[0], params[1], resolution)
    elif kind == "ellipse":
        pts, tris = _disc(1.0, resolution)
        pts = pts * np.array(params)
    elif kind == "annulus":
        outer, inner = params
        if inner >= outer:
            raise InvalidParameterError("annulus inner radius must be below the outer radius")
        pts, tris = _annulus(outer, inner, resolution)
    else:
        size, thickness = params
        if thickness >= size:
            raise InvalidParameterError("L-shape thickness must be below its size")
        pts, tris = _l_shape(size, thickness, resolution)
    return TriMesh2D(pts, tris)


# ---------------------------------------------------------------- file format

def load_mesh(path):
    """Read the ASCII ``nv nt`` / vertices / triangles format.

    Clockwise triangles are reoriented.
    """
    path = Path(path)
    if not path.is_file():
        raise MeshNotFoundError(f"mesh file not found: {path}")
    lines = [(k + 1, ln.split()) for k, ln in enumerate(path.read_text().splitlines())]
    lines = [(k, toks) for k, toks in lines if toks]
    if not lines:
        raise MeshFormatError("empty file", line=1)
    k, head = lines[0]
    if len(head) != 2:
        raise MeshFormatError("header must be 'nv nt'", line=k)
    try:
        nv, nt = int(head[0]), int(head[1])
    except ValueError:
        raise MeshFormatError("header counts must be integers", line=k) from None
    if nv < 3 or nt < 1:
        raise MeshFormatError(f"need at least 3 vertices and 1 triangle, got {nv} {nt}", line=k)
    body = lines[1:]
    if len(body) < nv + nt:
        last = body[-1][0] + 1 if body else k + 1
        raise MeshFormatError(f"expected {nv + nt} data lines, found {len(body)}", line=last)
    if len(body) > nv + nt:
        raise MeshFormatError("unexpected trailing data", line=body[nv + nt][0])
    verts = np.empty((nv, 2))
    for i, (k, toks) in enumerate(body[:nv]):
        if len(toks) != 2:
            raise MeshFormatError("vertex line must hold 'x2 x3'", line=k)
        try:
            verts[i] = float(toks[0]), float(toks[1])
        except ValueError:
            raise MeshFormatError("vertex coordinates must be decimal numbers", line=k) from None
    tris = np.empty((nt, 3), dtype=np.int64)
    for i, (k, toks) in enumerate(body[nv:]):
        if len(toks) != 3:
            raise MeshFormatError("triangle line must hold 'i j k'", line=k)
        try:
            tris[i] = [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError("triangle indices must be integers", line=k) from None
    return TriMesh2D.oriented(verts, tris)


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")


# ---------------------------------------------------------------- principal axes

def normalize_axes(mesh):
    """Move the centroid to the origin and align axes with the principal directions.

    Returns the transformed mesh and its :class:`SectionGeometry`. The
    x2 axis carries the larger moment; sections with equal moments are
    only translated.
    """
    area, s2, s3, _, _, _ = raw_moments(mesh)
    if not area > 0:
        raise MeshInvalidError(f"section area must be positive, got {area}")
    shift = (-s2 / area, -s3 / area)
    centered = mesh.transformed(shift)
    _, _, _, i22, i33, i23 = raw_moments(centered)
    gap = math.hypot(i22 - i33, 2.0 * i23)
    if gap <= 1e-12 * (i22 + i33):
        angle = 0.0
    else:
        angle = 0.5 * math.atan2(2.0 * i23, i22 - i33)
        if angle <= -np.pi / 2:
            angle += np.pi
    out = centered.transformed(angle=angle) if angle else centered
    area, _, _, mu2, mu3, _ = raw_moments(out)
    geom = SectionGeometry(
        translation=shift,
        rotation_angle=angle,
        area=area,
        mu2=mu2,
        mu3=mu3,
        diameter=out.diameter,
    )
    return out, geom


def check_normalized(mesh, tol=NORMALIZATION_TOL):
    """True when the first moments and the product moment vanish to ``tol``."""
    area, s2, s3, _, _, i23 = raw_moments(mesh)
    scale = tol * area * mesh.diameter**2
    return abs(s2) <= scale and abs(s3) <= scale and abs(i23) <= scale


def d_omega(point):
    """Embed section points as ``(0, x2, x3)``; accepts a pair or an ``(n, 2)`` array."""
    p = np.asarray(point, dtype=float)
    return np.concatenate([np.zeros(p.shape[:-1] + (1,)), p], axis=-1)
