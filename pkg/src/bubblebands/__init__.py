"""Boundary-integral band structures for 2D bubbly phononic crystals.

Computes sub-wavelength Bloch bands, Dirac cones, Bloch eigenfunctions and
homogenized (near-zero-index) envelope behaviour for honeycomb and square
lattices of high-contrast circular bubbles.

Submodules are imported lazily so the CLI entry point can pin threading
environment variables before numpy loads.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "Lattice": "bubblebands.lattice",
    "LatticeKind": "bubblebands.lattice",
    "make_lattice": "bubblebands.lattice",
    "dirac_point": "bubblebands.lattice",
    "bz_path": "bubblebands.lattice",
    "make_dimer": "bubblebands.boundary",
    "Material": "bubblebands.operators",
    "default_material": "bubblebands.operators",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(importlib.import_module(_EXPORTS[name]), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
