"""Exact truncated-series computations for holomorphic maps between real submanifolds.

Series, Segre maps, nondegeneracy certificates, infinitesimal deformations and
jet reconstruction, all over the Gaussian rationals.
"""

from .errors import (
    BudgetError,
    CRDeformError,
    InputError,
    VerificationError,
)
from .manifold import DefiningIdeal, Deformation, GenericManifold, check_maps_into, from_graph
from .series import GaussianRational, SeriesVector, TruncatedSeries, VariableBlocks

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "CRDeformError",
    "InputError",
    "VerificationError",
    "DefiningIdeal",
    "Deformation",
    "GenericManifold",
    "check_maps_into",
    "from_graph",
    "GaussianRational",
    "SeriesVector",
    "TruncatedSeries",
    "VariableBlocks",
    "__version__",
]
