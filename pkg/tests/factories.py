"""Random inputs shared by several test modules."""

import numpy as np

from pareto_nise.core import individual_minima
from pareto_nise.monise import WeightSelectionModel
from pareto_nise.problems import QuadraticSimplexProblem, knapsack_generate


def random_selection_model(rng, max_binaries=10):
    """Weight-selection model built from genuine weighted optima.

    Archives mix the individual minima with a few random-weight solves of a
    quadratic or small knapsack problem, so the relaxation is valid.
    """
    m = int(rng.choice([2, 3, 4]))
    L_max = max_binaries - m
    if rng.random() < 0.5:
        problem = QuadraticSimplexProblem(m)
    else:
        problem = knapsack_generate(int(rng.integers(6, 12)), m, 0.5, int(rng.integers(1 << 30)))
    minima = individual_minima(problem)
    utopian = np.array([s.objectives[k] for k, s in enumerate(minima)])
    archive = list(minima)
    relax = []
    extra = int(rng.integers(1, L_max - m + 2))
    for _ in range(extra):
        sol = problem.solve_weighted(rng.dirichlet(np.ones(m)))
        if any(np.allclose(sol.objectives, s.objectives, atol=1e-9) for s in archive):
            relax.append((sol.weight, sol.objectives))
        else:
            archive.append(sol)
    archive = archive[:L_max]
    return WeightSelectionModel.from_archive(archive, utopian, relax)
