"""Two-objective Non-Inferior Set Estimation.

Each neighborhood is a pair of adjacent efficient points. Its weight is the
normal of the line through them; its error ``mu`` is the distance from that
line to the corner where the two parents' supporting lines meet. The
neighborhood with the largest error is split next.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    DEDUP_TOL,
    ContractError,
    DegenerateError,
    Frontier,
    OracleError,
    OracleProblem,
    WeightedSolution,
    individual_minimum,
)


def nise_weight(r1, r2) -> np.ndarray:
    """Simplex normal ``w`` of the line through ``r1`` and ``r2``.

    Solves ``w.r1 - b = 0``, ``w.r2 - b = 0``, ``w.1 = 1`` for ``(w, b)``.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != (2,) or r2.shape != (2,):
        raise ContractError("nise_weight is defined for two objectives only")
    if np.max(np.abs(r1 - r2)) <= DEDUP_TOL:
        raise DegenerateError("neighborhood points coincide")
    system = np.array([[r1[0], r1[1], -1.0], [r2[0], r2[1], -1.0], [1.0, 1.0, 0.0]])
    if abs(np.linalg.det(system)) < 1e-12:
        raise DegenerateError("r1 - r2 is parallel to (1, 1); no simplex normal exists")
    sol = np.linalg.solve(system, np.array([0.0, 0.0, 1.0]))
    return sol[:2]


def intersection_point(w1, r1, w2, r2) -> np.ndarray:
    """Corner ``p`` with ``w1.p = w1.r1`` and ``w2.p = w2.r2``."""
    W = np.vstack([np.asarray(w1, dtype=float), np.asarray(w2, dtype=float)])
    if W.shape != (2, 2):
        raise ContractError("intersection_point is defined for two objectives only")
    if abs(np.linalg.det(W)) < 1e-12:
        raise DegenerateError("supporting lines are parallel")
    rhs = np.array([W[0] @ np.asarray(r1, dtype=float), W[1] @ np.asarray(r2, dtype=float)])
    return np.linalg.solve(W, rhs)


def estimation_error(w, r, p) -> float:
    w = np.asarray(w, dtype=float)
    gap = float(w @ np.asarray(r, dtype=float) - w @ np.asarray(p, dtype=float))
    return float(np.sqrt(gap**2 / (w @ w)))


@dataclass(frozen=True)
class Neighborhood:
    sol_a: WeightedSolution
    sol_b: WeightedSolution
    weight: np.ndarray
    intersection: np.ndarray
    mu: float


def make_neighborhood(sol_a: WeightedSolution, sol_b: WeightedSolution) -> Neighborhood:
    r1, r2 = sol_a.objectives, sol_b.objectives
    w = nise_weight(r1, r2)
    p = intersection_point(sol_a.weight, r1, sol_b.weight, r2)
    mu = estimation_error(w, r1, p)
    # both parents lie on the line, so measuring from r2 must agree
    assert abs(estimation_error(w, r2, p) - mu) < 1e-8 * max(1.0, mu)
    return Neighborhood(sol_a, sol_b, w, p, mu)


class NiseRun:
    """Stateful NISE driver; ``weights`` records every interior weight issued."""

    def __init__(self, problem: OracleProblem, mu_stop: float, max_iter: int = 200):
        if problem.m != 2:
            raise ContractError(f"NISE needs exactly two objectives, got m={problem.m}")
        if mu_stop <= 0:
            raise ContractError("mu_stop must be positive")
        self.problem = problem
        self.mu_stop = mu_stop
        self.max_iter = max_iter
        self.frontier = Frontier()
        self.weights: list[np.ndarray] = []
        self.neighborhoods_seen: list[Neighborhood] = []
        self._heap: list = []
        self._order = itertools.count()

    def _push(self, sol_a, sol_b):
        try:
            nb = make_neighborhood(sol_a, sol_b)
        except DegenerateError:
            return
        self.neighborhoods_seen.append(nb)
        heapq.heappush(self._heap, (-nb.mu, next(self._order), nb))

    def _solve(self, w) -> WeightedSolution:
        t0 = time.perf_counter()
        try:
            return self.problem.solve_weighted(w)
        except OracleError as exc:
            self.frontier.status = "failed"
            raise OracleError(str(exc), partial=self.frontier) from exc
        finally:
            self.frontier.oracle_seconds += time.perf_counter() - t0

    def run(self) -> Frontier:
        fr = self.frontier
        t0 = time.perf_counter()
        try:
            first = individual_minimum(self.problem, 0)
            second = individual_minimum(self.problem, 1)
        except OracleError as exc:
            fr.status = "failed"
            raise OracleError(str(exc), partial=fr) from exc
        finally:
            fr.oracle_seconds += time.perf_counter() - t0
        fr.utopian = np.array([first.objectives[0], second.objectives[1]])
        fr.add(first)
        fr.add(second)
        self._push(first, second)

        iterations = 0
        while True:
            if not self._heap:
                fr.mu_history.append(0.0)
                fr.status = "converged"
                break
            mu = -self._heap[0][0]
            fr.mu_history.append(mu)
            if mu <= self.mu_stop:
                fr.status = "converged"
                break
            if iterations >= self.max_iter:
                fr.status = "max_iter"
                break
            _, _, nb = heapq.heappop(self._heap)
            self.weights.append(nb.weight)
            sol = self._solve(nb.weight)
            iterations += 1
            parents = (nb.sol_a.objectives, nb.sol_b.objectives)
            if any(np.max(np.abs(sol.objectives - r)) <= DEDUP_TOL for r in parents):
                # the segment is already on the frontier: close it
                continue
            fr.add(sol)
            self._push(nb.sol_a, sol)
            self._push(sol, nb.sol_b)
        return fr


def run_nise(problem: OracleProblem, mu_stop: float = 1e-3, max_iter: int = 200) -> Frontier:
    return NiseRun(problem, mu_stop, max_iter).run()
