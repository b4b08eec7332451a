"""Numerical laboratory for the three-wave-interaction NLS system.

Ground and excited standing waves by constrained variational minimization,
structure-preserving time evolution, virial-based blow-up detection, and
scenario runners that check the qualitative theory at desk scale.
"""

from .grid import SpectralGrid
from .model import ModelParams, DerivedConstants, Diagnostics
from .kernels import COMPILED as compiled_kernels

__all__ = [
    "SpectralGrid",
    "ModelParams",
    "DerivedConstants",
    "Diagnostics",
    "compiled_kernels",
]

__version__ = "0.1.0"
