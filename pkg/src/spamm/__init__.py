"""Sparse approximate matrix multiply (SpAMM) for matrices with decay.

Matrices are stored as quadtrees of 16x16 single-precision blocks carrying
hierarchical Frobenius norms.  A multiply first runs a symbolic phase that
sorts leaf keys and prunes block products whose norm product falls below a
tolerance tau, then a numeric phase that executes the surviving products
with 4x4x4 micro kernels, optionally gated by 4x4 sub-block norms.
"""

from .core import (
    DenseMatrix,
    LeafBlock,
    QuadtreeMatrix,
    TreeNode,
    drop_tolerance,
    tree_depth,
)
from .generators import KINDS, GeneratorSpec, envelope, generate
from .io import (
    MatrixFormatError,
    load_matrix,
    load_quadtree,
    save_matrix,
    save_quadtree,
)
from .morton import c_index, child, decode, encode, k_of_a, k_of_b, parent
from .numeric import (
    ExecCounters,
    MultiplyConfig,
    block_multiply_16,
    execute_plan,
    execute_plan_dense_leaf,
    micro_kernel_4,
    multiply,
)
from .reference import (
    ErrorReport,
    PerfModel,
    dense_multiply_double,
    dense_multiply_single,
    effective_performance,
    flop_model,
    max_norm_error,
    recursive_spamm,
)
from .symbolic import (
    IndexEntry,
    KBlock,
    MultiplyPlan,
    PlanStats,
    ProductTask,
    build_plan,
    convolve,
    extract_entries,
    plan_dump,
    plan_stats,
    sort_by_k,
    sort_kblocks_by_norm,
)

__version__ = "0.1.0"
