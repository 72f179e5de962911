"""Sparse precision matrix estimation by averaging DAG-Wishart fits over variable orderings."""

__version__ = "0.1.0"

from .dagwishart import DagScorer, DagWishartParams, PriorTemplate, map_estimate, mle_estimate
from .ensemble import EnsembleEstimate, Permutation, Variant, estimate, estimate_variants
from .errors import InputError, NumericalError, PermDagError
from .graph import Dag
from .linalg import CholeskyParam, mcd
from .selection import SelectionConfig, select_dag
from .simbench import BenchmarkConfig, Case, ScenarioSpec, losses, make_omega, run_benchmark, sample_gaussian

__all__ = [
    "BenchmarkConfig", "Case", "CholeskyParam", "Dag", "DagScorer", "DagWishartParams",
    "EnsembleEstimate", "InputError", "NumericalError", "PermDagError", "Permutation",
    "PriorTemplate", "ScenarioSpec", "SelectionConfig", "Variant", "estimate",
    "estimate_variants", "losses", "make_omega", "map_estimate", "mcd", "mle_estimate",
    "run_benchmark", "sample_gaussian", "select_dag",
]
