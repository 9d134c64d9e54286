"""Conditional eigenvector overlaps of the complex Ginibre ensemble.

Finite-N and scaling-limit overlap functions, the kernels they are built
from, Monte Carlo validation and a normal-matrix eigenvalue SDE.
"""

__version__ = "0.1.0"

from .errors import CollisionError, IllConditionedSampleError, InvalidOrderError, SingularInputError
from .overlaps import (
    OverlapKind,
    OverlapValue,
    d11_bulk,
    d11_edge,
    d11_finite,
    d12_bulk,
    d12_edge,
    d12_finite,
    rho_bulk,
    rho_finite,
)
from .points import KernelArgs, SpectralPoint, SpectralTuple
from .scaledarith import ScaledComplex

__all__ = [
    "__version__",
    "CollisionError",
    "IllConditionedSampleError",
    "InvalidOrderError",
    "KernelArgs",
    "OverlapKind",
    "OverlapValue",
    "ScaledComplex",
    "SingularInputError",
    "SpectralPoint",
    "SpectralTuple",
    "d11_bulk",
    "d11_edge",
    "d11_finite",
    "d12_bulk",
    "d12_edge",
    "d12_finite",
    "rho_bulk",
    "rho_finite",
]
