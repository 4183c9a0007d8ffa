"""Direct solver for 2D variable-coefficient elliptic boundary-value problems.

The domain is tiled with small Chebyshev collocation patches; patch
boundary-to-boundary derivative maps are merged pairwise up a binary tree,
yielding a precomputed solution operator that is applied per Dirichlet
data vector in a single downward sweep.
"""

from .bessel import bessel_j0, bessel_j1, bessel_y0, bessel_y1
from .dtn import OperatorTriple, leaf_factor, merge, restrict_to_normal_rows
from .errors import (
    EllipticityError,
    InconsistentChildrenError,
    NonFiniteCoefficientError,
    ProbeOffMeshError,
    ResonanceError,
    ResonantLeafError,
    ResonantMergeError,
    UndecomposableLayoutError,
    UnsupportedLayoutError,
)
from .geometry import (
    DomainSpec,
    GlobalMesh,
    Tree,
    TreeNode,
    build_mesh,
    build_tree,
    partition_interface,
)
from .pde import (
    EllipticOperator,
    HelmholtzProblem,
    ReferenceSolution,
    assemble_leaf_matrix,
    builtin_problems,
    helmholtz_reference,
)
from .solver import (
    Solution,
    SolverState,
    dense_oracle,
    error_metrics,
    load_state,
    pointwise_convergence,
    precompute,
    save_state,
    solve,
)
from .spectral import Cheb1D, TensorGrid, cheb_diff_1d, cheb_nodes, tensor_grid

__version__ = "0.1.0"

__all__ = [
    "bessel_j0",
    "bessel_j1",
    "bessel_y0",
    "bessel_y1",
    "OperatorTriple",
    "leaf_factor",
    "merge",
    "restrict_to_normal_rows",
    "EllipticityError",
    "InconsistentChildrenError",
    "NonFiniteCoefficientError",
    "ProbeOffMeshError",
    "ResonanceError",
    "ResonantLeafError",
    "ResonantMergeError",
    "UndecomposableLayoutError",
    "UnsupportedLayoutError",
    "DomainSpec",
    "GlobalMesh",
    "Tree",
    "TreeNode",
    "build_mesh",
    "build_tree",
    "partition_interface",
    "EllipticOperator",
    "HelmholtzProblem",
    "ReferenceSolution",
    "assemble_leaf_matrix",
    "builtin_problems",
    "helmholtz_reference",
    "Solution",
    "SolverState",
    "dense_oracle",
    "error_metrics",
    "load_state",
    "pointwise_convergence",
    "precompute",
    "save_state",
    "solve",
    "Cheb1D",
    "TensorGrid",
    "cheb_diff_1d",
    "cheb_nodes",
    "tensor_grid",
    "__version__",
]
