"""Rough almost complex structures: integrability checks, function-space
norms and holomorphic charts by Malgrange factorization on a periodic grid."""
from .errors import (
    AdmissibilityLost,
    FormatError,
    GraphConditionFailed,
    GridMismatch,
    InvalidParameter,
    NoConvergence,
    RoughACSError,
    SingularFactor,
    SingularJacobian,
    TooFewBlocks,
)
from .grid import Field, Grid, MapField, make_grid, set_threads
from .structures import BeltramiMatrix, StructureField, VectorField

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityLost",
    "BeltramiMatrix",
    "Field",
    "FormatError",
    "GraphConditionFailed",
    "Grid",
    "GridMismatch",
    "InvalidParameter",
    "MapField",
    "NoConvergence",
    "RoughACSError",
    "SingularFactor",
    "SingularJacobian",
    "StructureField",
    "TooFewBlocks",
    "VectorField",
    "make_grid",
    "set_threads",
]
