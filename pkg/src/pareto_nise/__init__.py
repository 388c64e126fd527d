"""Adaptive weighted-sum approximation of Pareto frontiers.

Two-objective NISE, its many-objective extension MONISE (weights chosen by a
mixed-integer program over all past solutions), benchmark oracles and
hypervolume tools.
"""

from .core import (
    ContractError,
    DegenerateError,
    Frontier,
    OracleError,
    WeightedSolution,
    dominates,
    filter_nondominated,
    individual_minima,
    nondominated_mask,
    solve_weighted,
    utopian,
)
from .metrics import (
    evaluate_hypervolume,
    hypervolume,
    hypervolume_monte_carlo,
    incremental_contribution,
    reference_point,
)
from .monise import MoniseRun, next_weight, run_monise, weight_gap
from .nise2d import NiseRun, run_nise
from .problems import (
    KnapsackInstance,
    MultilabelInstance,
    QuadraticSimplexProblem,
    knapsack_generate,
    synthetic_multilabel_generate,
)

__all__ = [
    "ContractError",
    "DegenerateError",
    "Frontier",
    "KnapsackInstance",
    "MoniseRun",
    "MultilabelInstance",
    "NiseRun",
    "OracleError",
    "QuadraticSimplexProblem",
    "WeightedSolution",
    "dominates",
    "evaluate_hypervolume",
    "filter_nondominated",
    "hypervolume",
    "hypervolume_monte_carlo",
    "incremental_contribution",
    "individual_minima",
    "knapsack_generate",
    "next_weight",
    "nondominated_mask",
    "reference_point",
    "run_monise",
    "run_nise",
    "solve_weighted",
    "synthetic_multilabel_generate",
    "utopian",
    "weight_gap",
]
