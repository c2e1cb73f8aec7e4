"""Dirichlet spectra of weighted divergence-form elliptic operators on
bounded 1D/2D domains, with verification of the universal eigenvalue
inequalities they satisfy.

Submodules are imported lazily so the command-line entry point can cap
BLAS threading before numpy initializes.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = ("domain", "coeffs", "assemble", "eigen", "bounds", "cli")


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
