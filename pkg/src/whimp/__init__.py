"""All-pairs cosine similarity search by wedge sampling with SimHash filtering."""

from .engine import Candidate, CostReport, WhimpConfig, WhimpResult, run_whimp
from .matrix import RawGraph, SparseColumnMatrix, build_column_matrix, clean_degree_cap, ingest_edge_list

__all__ = [
    "Candidate",
    "CostReport",
    "WhimpConfig",
    "WhimpResult",
    "run_whimp",
    "RawGraph",
    "SparseColumnMatrix",
    "build_column_matrix",
    "clean_degree_cap",
    "ingest_edge_list",
]

__version__ = "0.1.0"
