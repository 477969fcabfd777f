"""Command-line entry point: ``rodhomog {section,stiffness,rod,probe}``.

Every command writes one JSON report (to ``--out`` or standard output).
Reports are deterministic for identical inputs and carry the package
version plus a SHA-256 hash of the resolved configuration. Errors are
written to standard error as ``{"error": {"code": ..., "message": ...}}``
with exit status 1 for numerical failures and 2 for input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__

log = logging.getLogger("rodhomog")

PRIMITIVE_FLAGS = {
    "disc": ("radius",),
    "rectangle": ("width", "height"),
    "ellipse": ("a", "b"),
    "annulus": ("outer_radius", "inner_radius"),
    "L-shape": ("size", "thickness"),
}
PRIMITIVE_DEFAULTS = {
    "radius": 1.0, "width": 1.0, "height": 1.0, "a": 2.0, "b": 1.0,
    "outer_radius": 1.0, "inner_radius": 0.5, "size": 1.0, "thickness": 0.3,
}
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class _InputProblem(Exception):
    """Raised for CLI-level input errors found before any module runs."""

    code = "invalid-parameter"
    exit_status = 2

    def __init__(self, message, code=None):
        super().__init__(message)
        if code:
            self.code = code


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _ladder(text):
    try:
        hs = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"h ladder must be numbers, got {text!r}") from None
    if not hs or not all(0 < h <= 1 for h in hs):
        raise argparse.ArgumentTypeError(f"h values must lie in (0, 1], got {text!r}")
    return hs


def _add_section_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="ASCII mesh file ('nv nt', vertices, triangles)")
    src.add_argument("--primitive", choices=sorted(PRIMITIVE_FLAGS), help="built-in section shape")
    for name in PRIMITIVE_DEFAULTS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=_positive_float,
                       help=f"primitive dimension (default {PRIMITIVE_DEFAULTS[name]})")
    p.add_argument("--resolution", type=int, default=2000, help="target triangle count for primitives")


def _add_common(p):
    p.add_argument("--tol", type=_positive_float, default=1e-10, help="linear solver tolerance")
    p.add_argument("--seed", type=int, default=0, help="random seed (recorded in the report)")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread count (default: all cores)")
    p.add_argument("--out", help="report path (default: standard output)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")


def build_parser():
    parser = argparse.ArgumentParser(prog="rodhomog", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("section", help="section geometry and torsion constant")
    _add_section_args(p)
    _add_common(p)

    p = sub.add_parser("stiffness", help="effective stiffness M, Q0 and a_min")
    _add_section_args(p)
    p.add_argument("--material", required=True, help="material config file")
    _add_common(p)

    p = sub.add_parser("rod", help="minimize the rod energy over frame curves")
    _add_section_args(p)
    p.add_argument("--material", required=True, help="material config file")
    p.add_argument("--length", type=_positive_float, default=1.0)
    p.add_argument("--intervals", type=int, default=64)
    end = p.add_mutually_exclusive_group()
    end.add_argument("--end-rotation", nargs=3, type=float, metavar=("K1", "K2", "K3"),
                     help="clamp the far end at exp(hat(K)) (default: twist by --twist)")
    end.add_argument("--end-moment", nargs=3, type=float, metavar=("M1", "M2", "M3"),
                     help="free far end loaded by this moment")
    p.add_argument("--twist", type=float, default=0.5, help="clamped end twist angle about e1")
    _add_common(p)

    p = sub.add_parser("probe", help="recovery-sequence energy ladder")
    _add_section_args(p)
    p.add_argument("--material", required=True, help="material config file")
    p.add_argument("--h-ladder", type=_ladder, default=[0.2, 0.1, 0.05])
    p.add_argument("--strain", nargs=3, type=float, default=[0.0, 2.0, 0.0], metavar=("K1", "K2", "K3"),
                   help="axial vector of the constant strain R^T R'")
    p.add_argument("--length", type=_positive_float, default=1.0)
    p.add_argument("--intervals", type=int, default=100)
    _add_common(p)
    return parser


# ---------------------------------------------------------------- config

def resolve_config(args) -> dict:
    """Plain JSON-able configuration; file inputs are recorded with their digests."""
    cfg = {"command": args.command, "tol": args.tol, "seed": args.seed}
    if args.mesh:
        if not Path(args.mesh).is_file():
            raise _InputProblem(f"mesh file not found: {args.mesh}", "mesh-not-found")
        cfg["mesh"] = {"path": str(args.mesh), "sha256": _file_digest(args.mesh)}
    else:
        kind = args.primitive or "disc"
        dims = [getattr(args, k) for k in PRIMITIVE_FLAGS[kind]]
        dims = [PRIMITIVE_DEFAULTS[k] if d is None else d for k, d in zip(PRIMITIVE_FLAGS[kind], dims)]
        cfg["mesh"] = {"primitive": kind, "params": dims, "resolution": args.resolution}
    if getattr(args, "material", None):
        if not Path(args.material).is_file():
            raise _InputProblem(f"material file not found: {args.material}", "material-not-found")
        cfg["material"] = {"path": str(args.material), "sha256": _file_digest(args.material)}
    if args.command == "rod":
        cfg.update(length=args.length, intervals=args.intervals)
        if args.end_moment is not None:
            cfg["end_moment"] = list(args.end_moment)
        elif args.end_rotation is not None:
            cfg["end_rotation"] = list(args.end_rotation)
        else:
            cfg["end_rotation"] = [args.twist, 0.0, 0.0]
    if args.command == "probe":
        cfg.update(h_ladder=list(args.h_ladder), strain=list(args.strain),
                   length=args.length, intervals=args.intervals)
    return cfg


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------- commands

def _section(cfg):
    import warnings

    from .cross_section import build_primitive, load_mesh, normalize_axes
    from .fem2d import torsion_constant

    m = cfg["mesh"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if "path" in m:
            mesh = load_mesh(m["path"])
        else:
            mesh = build_primitive(m["primitive"], m["params"], m["resolution"])
    mesh, geo = normalize_axes(mesh)
    geo = geo.with_torsion_constant(torsion_constant(mesh, cfg["tol"]))
    return mesh, geo


def _stiffness(cfg, keep_correctors=False):
    from .effective_stiffness import effective_matrix
    from .material import load_material

    mesh, geo = _section(cfg)
    law = load_material(cfg["material"]["path"])
    return mesh, law, effective_matrix(mesh, law, geo, cfg["tol"], keep_correctors=keep_correctors)


def run_section(cfg):
    mesh, geo = _section(cfg)
    out = geo.as_dict()
    out["mesh_stats"] = mesh.stats()
    return out


def run_stiffness(cfg):
    _, _, stiff = _stiffness(cfg)
    return stiff.as_dict()


def run_rod(cfg):
    import numpy as np

    from .rod_model import minimize_rod
    from .so3 import expm

    _, _, stiff = _stiffness(cfg)
    kw = {}
    if "end_moment" in cfg:
        kw["end_moment"] = np.array(cfg["end_moment"])
    else:
        kw["R_end"] = expm(np.array(cfg["end_rotation"]))
    sol = minimize_rod(stiff, n=cfg["intervals"], length=cfg["length"], **kw)
    return {
        "energy": sol.energy,
        "iterations": sol.iterations,
        "gradient_norm": sol.gradient_norm,
        "converged": sol.converged,
        "monotone": sol.monotone,
        "frame": sol.frame.to_json(),
    }


def run_probe(cfg):
    from .probe3d import gamma_probe

    mesh, law, stiff = _stiffness(cfg, keep_correctors=True)
    rep = gamma_probe(mesh, law, cfg["strain"], cfg["h_ladder"], cfg["length"],
                      cfg["intervals"], stiffness=stiff)
    return rep.as_dict()


COMMANDS = {"section": run_section, "stiffness": run_stiffness, "rod": run_rod, "probe": run_probe}


def _jsonable(obj):
    """Convert numpy scalars and arrays left in a report."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def run(cfg: dict) -> dict:
    """Execute a resolved configuration and return the report."""
    result = COMMANDS[cfg["command"]](cfg)
    return _jsonable({
        "command": cfg["command"],
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "result": result,
    })


def _fail(exc, status):
    err = {"error": {"code": getattr(exc, "code", "error"), "message": str(exc), "exit_status": status}}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            return _fail(_InputProblem(f"--threads must be >= 1, got {args.threads}"), 2)
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    from .errors import RodHomogError

    try:
        cfg = resolve_config(args)
        report = run(cfg)
    except _InputProblem as exc:
        return _fail(exc, exc.exit_status)
    except RodHomogError as exc:
        return _fail(exc, exc.exit_status)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            return _fail(_InputProblem(f"cannot write report: {exc}", "output"), 2)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
