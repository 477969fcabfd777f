"""Homogenized bending-torsion rods from heterogeneous cross-sections.

Submodules are imported on first attribute access so that the command-line
entry point can configure threading before numpy loads.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

__all__ = [
    "cross_section",
    "fem2d",
    "material",
    "effective_stiffness",
    "so3",
    "rod_model",
    "probe3d",
    "cli",
    "errors",
    "BACKEND",
]


def __getattr__(name):
    if name == "BACKEND":
        return importlib.import_module("._backend", __name__).BACKEND
    if name in __all__:
        return importlib.import_module("." + name, __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
