"""Constraint-preconditioned Krylov solvers for regularized saddle-point systems.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._cpkrylov import (
    IndefiniteError,
    SingularMatrixError,
    SolveResult,
    SolveStatus,
    direct_solve,
    gen_random_system,
    solve,
    spectrum,
)

__all__ = [
    "IndefiniteError",
    "SingularMatrixError",
    "SolveResult",
    "SolveStatus",
    "direct_solve",
    "gen_random_system",
    "solve",
    "spectrum",
]

__version__ = "0.1.0"
