"""Hierarchical kernel-matrix compression, fast summation, and direct solves.

The pipeline: build a balanced spatial tree over the points, compute
nested skeletons bottom-up, assemble the compressed operator (exact leaf
blocks plus skeleton-level sibling couplings), multiply by it in
near-linear time, factorize it exactly with a recursive
Sherman-Morrison-Woodbury scheme, and optionally wrap the factorization as
a GMRES preconditioner to solve the true (uncompressed) system. A dense
brute-force oracle backs every accuracy claim.
"""

from .config import Config
from .data import PointSet, generate, load_points, save_points
from .kernels import KernelSpec, eval_block, eval_system_diag_shift
from .krylov import KrylovReport, gmres, hybrid_solve
from .linalg import (
    DenseFactor,
    PivotedQRResult,
    SingularMatrixError,
    factor_dense,
    interpolative_decomposition,
    pivoted_qr,
    solve_dense,
)
from .skeleton import Skeleton, SkeletonConfig, SkeletonSet, build_skeletons
from .solver import Factorization, FactorizationError, factorize, solve, solve_multi
from .tree import PartitionTree, build_tree, knn_bruteforce, levels
from .treecode import (
    HierarchicalOperator,
    build_operator,
    hmatvec,
    materialize_ktilde,
    upward_pass,
)

__version__ = "0.1.0"

__all__ = [
    "Config",
    "DenseFactor",
    "Factorization",
    "FactorizationError",
    "HierarchicalOperator",
    "KernelSpec",
    "KrylovReport",
    "PartitionTree",
    "PivotedQRResult",
    "PointSet",
    "Skeleton",
    "SkeletonConfig",
    "SkeletonSet",
    "SingularMatrixError",
    "build_operator",
    "build_skeletons",
    "build_tree",
    "eval_block",
    "eval_system_diag_shift",
    "factor_dense",
    "factorize",
    "generate",
    "gmres",
    "hmatvec",
    "hybrid_solve",
    "interpolative_decomposition",
    "knn_bruteforce",
    "levels",
    "load_points",
    "materialize_ktilde",
    "pivoted_qr",
    "save_points",
    "solve",
    "solve_dense",
    "solve_multi",
    "upward_pass",
]
