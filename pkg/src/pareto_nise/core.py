"""Domain types, dominance predicates and the weighted-sum oracle contract.

Everything is expressed as minimization. Problems that maximize (knapsack)
negate their objectives inside the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

SIMPLEX_TOL = 1e-9
RENORMALIZE_TOL = 1e-6
DEDUP_TOL = 1e-9


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class OracleError(RuntimeError):
    """The weighted-sum oracle failed (infeasible, unbounded, no convergence)."""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class DegenerateError(ArithmeticError):
    """A linear system used to build a neighborhood is singular."""


def as_objectives(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if arr.ndim != 1:
        raise ContractError(f"objective vector must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ContractError("objective vector is empty")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"objective vector has non-finite entries: {arr}")
    return arr


def as_weight(values: Iterable[float]) -> np.ndarray:
    """Validate a weight vector on the unit simplex.

    Sums within 1e-6 of one are renormalized; anything further off is
    rejected rather than silently fixed.
    """
    w = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ContractError(f"weight must be a non-empty 1-D vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ContractError(f"weight has non-finite entries: {w}")
    if np.any(w < -SIMPLEX_TOL):
        raise ContractError(f"weight has negative entries: {w}")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if abs(total - 1.0) > RENORMALIZE_TOL:
        raise ContractError(f"weight does not sum to 1 (sum={total!r})")
    return w / total


def unit_weight(m: int, k: int) -> np.ndarray:
    w = np.zeros(m)
    w[k] = 1.0
    return w


@dataclass(frozen=True, eq=False)
class WeightedSolution:
    """Result of one oracle call: weight, objective vector and decision."""

    weight: np.ndarray
    objectives: np.ndarray
    decision: Any = None
    oracle_value: float = float("nan")

    def __post_init__(self):
        w = as_weight(self.weight)
        f = as_objectives(self.objectives)
        if w.shape != f.shape:
            raise ContractError(f"weight has {w.size} entries but objectives have {f.size}")
        w.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "objectives", f)
        value = float(w @ f)
        if np.isnan(self.oracle_value):
            object.__setattr__(self, "oracle_value", value)
        elif abs(self.oracle_value - value) > 1e-8 * max(1.0, abs(value)):
            raise ContractError(
                f"oracle_value {self.oracle_value} disagrees with w.f = {value}"
            )

    @property
    def m(self) -> int:
        return self.objectives.size

    def to_dict(self) -> dict:
        return {
            "weight": self.weight.tolist(),
            "objectives": self.objectives.tolist(),
            "oracle_value": self.oracle_value,
        }


@dataclass
class Frontier:
    """Archive of weighted solutions produced by a run.

    ``mu_history`` holds the estimation error reported at each iteration.
    ``status`` is ``"converged"``, ``"max_iter"``, ``"budget"``, ``"timeout"``
    or ``"failed"``. ``failures`` counts skipped oracle calls (baseline only).
    """

    solutions: list[WeightedSolution] = field(default_factory=list)
    mu_history: list[float] = field(default_factory=list)
    utopian: np.ndarray | None = None
    status: str = "running"
    oracle_seconds: float = 0.0
    selection_seconds: float = 0.0
    failures: int = 0

    def __len__(self) -> int:
        return len(self.solutions)

    def contains(self, objectives: np.ndarray, tol: float = DEDUP_TOL) -> bool:
        return any(
            np.max(np.abs(s.objectives - objectives)) <= tol for s in self.solutions
        )

    def add(self, sol: WeightedSolution, tol: float = DEDUP_TOL) -> bool:
        """Append ``sol`` unless an equal objective vector is archived already."""
        if self.contains(sol.objectives, tol):
            return False
        self.solutions.append(sol)
        return True

    def objective_matrix(self) -> np.ndarray:
        if not self.solutions:
            return np.empty((0, 0))
        return np.vstack([s.objectives for s in self.solutions])

    def weight_matrix(self) -> np.ndarray:
        if not self.solutions:
            return np.empty((0, 0))
        return np.vstack([s.weight for s in self.solutions])


@runtime_checkable
class OracleProblem(Protocol):
    """Anything that can minimize ``w . f(x)`` exactly for a simplex weight."""

    m: int

    def solve_weighted(self, w: np.ndarray) -> WeightedSolution: ...


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of rows not dominated by any other row.

    Exact duplicates do not dominate each other, so all copies survive.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=bool)
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dominated_by = le & lt  # [i, j]: i dominates j
    return ~dominated_by.any(axis=0)


def filter_nondominated(points) -> np.ndarray:
    """Return the rows of ``points`` not dominated by any other row."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 0)
    if pts.ndim != 2:
        raise ContractError(f"expected an (n, m) array, got shape {pts.shape}")
    return pts[nondominated_mask(pts)]


def solve_weighted(problem: OracleProblem, w) -> WeightedSolution:
    w = as_weight(w)
    if w.size != problem.m:
        raise ContractError(f"weight has {w.size} entries, problem has m={problem.m}")
    return problem.solve_weighted(w)


def individual_minimum(problem: OracleProblem, k: int) -> WeightedSolution:
    if not 0 <= k < problem.m:
        raise ContractError(f"objective index {k} outside [0, {problem.m})")
    try:
        return problem.solve_weighted(unit_weight(problem.m, k))
    except OracleError as exc:
        raise OracleError(f"individual minimum of objective {k} failed: {exc}") from exc


def individual_minima(problem: OracleProblem) -> list[WeightedSolution]:
    return [individual_minimum(problem, k) for k in range(problem.m)]


def utopian(problem: OracleProblem, offset: float = 0.0, minima=None) -> np.ndarray:
    """Vector of per-objective minima, shifted down by ``offset``."""
    if offset < 0:
        raise ContractError("utopian offset must be >= 0")
    if minima is None:
        minima = individual_minima(problem)
    z = np.array([sol.objectives[k] for k, sol in enumerate(minima)])
    return z - offset
