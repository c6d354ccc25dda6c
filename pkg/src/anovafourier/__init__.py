"""Sparse ANOVA-structured Fourier approximation of periodic functions.

Core pipeline: grouped frequency index sets over downward-closed term
families, matrix-free least squares (LSQR for scattered data, one-FFT
adjoint solves on reconstructing rank-1 lattices), global sensitivity
indices for active-set detection, and closed-form truncation bounds for
product-and-order-dependent weights.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .anova import (CoefficientMap, SensitivityReport, direct_formula_check,
                    quadrature_projection, sensitivity, support,
                    term_family_ds, truncate, variance)
from .index_sets import (GroupedIndexSet, LowDimIndexSet, TermFamily,
                         difference_set, diff_cardinality_bound, embed,
                         family_cardinality, full_grid, grouped,
                         hyperbolic_cross, weighted_index_set)
from .lattice import (DualLatticeWindow, Rank1Lattice, aliasing_sum,
                      cbc_construct, is_reconstructing, lattice_evaluate,
                      lattice_reconstruct)
from .method import (ActiveSetResult, ApproxModel, DetectionConfig,
                     approximate, build_search_sets, detect, gap_intervals)
from .operator import (BlockFourierOperator, NodeSet, SolveReport,
                       lattice_nodes, lattice_solve, lsqr, uniform_nodes)
from .weights import (WeightParams, min_excluded_weight, pod_weight,
                      sobolev_trunc_bound_l2, sobolev_trunc_bound_linf,
                      sobolev_trunc_bound_linf_closed, superposition_threshold,
                      wiener_trunc_bound, zeta)
