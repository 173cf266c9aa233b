"""Sparse binary measurement matrices from spectral expanders, with l1 recovery."""

from .analysis import (
    certify_tanner_rnsp,
    contraction_check,
    decompose_support,
    lift_constants,
    per_block_inequality_check,
)
from .graphs import (
    DoubleCover,
    RegularGraph,
    certify,
    double_cover,
    edges_between,
    mixing_check,
    random_regular,
    second_eigenvalue,
)
from .inner_code import InnerCode, min_tau, search_inner_code, verify_rnsp
from .recovery import guarantee_check, l1_minimize, sigma_s
from .tanner import TannerMatrix, assemble, export_matrix_market, import_matrix_market, structure_report

__version__ = "0.1.0"
