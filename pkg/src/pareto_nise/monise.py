"""Many-objective NISE.

Every past weighted solve ``(w_i, r_i)`` contributes two kinds of
information about the unexplored part of the frontier:

* relaxation: any point reachable by the weighted method satisfies
  ``w_i . r >= w_i . r_i``;
* approximation: for a new weight ``w`` its optimum satisfies
  ``w . r <= min_i w . r_i``.

The next weight maximizes the gap ``mu`` between the two bounds. That
problem is bilinear; replacing the inner LP over ``(w, v)`` by its KKT
system, with big-M binaries for complementarity, makes it a MILP whose
objective is the simplex multiplier ``xi``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import mip
from .core import (
    DEDUP_TOL,
    ContractError,
    Frontier,
    OracleError,
    OracleProblem,
    WeightedSolution,
    as_weight,
    individual_minima,
)

RANGE_FLOOR = 1e-12
# relaxation coefficients below this count as zero when bounding r_low
COEF_FLOOR = 1e-9


class SelectionError(RuntimeError):
    """The weight-selection MILP could not be solved to optimality."""

    def __init__(self, message: str, incumbent=None, partial=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.partial = partial


def normalize_archive(points, utopian):
    """Map objectives to ``(f - z) / range`` with ranges taken over ``points``.

    Returns ``(normalized, utopian, scale)``; the inverse map is
    ``f = utopian + scale * normalized``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = np.asarray(utopian, dtype=float)
    shifted = pts - z
    tol = 1e-8 * np.maximum(1.0, np.abs(z))
    if np.any(shifted < -tol):
        worst = float(shifted.min())
        raise ContractError(f"archive point lies below the utopian point by {-worst:g}")
    shifted = np.clip(shifted, 0.0, None)
    scale = np.maximum(shifted.max(axis=0), RANGE_FLOOR)
    return shifted / scale, z, scale


@dataclass
class WeightSelectionModel:
    """Data for one weight-selection problem, already in normalized units.

    ``points`` are the distinct archived objective vectors (approximation
    side); ``relax_weights``/``relax_points`` hold one row per weighted solve
    (relaxation side), so a solve that returned a known point still counts.
    """

    points: np.ndarray
    relax_weights: np.ndarray
    relax_points: np.ndarray
    utopian: np.ndarray
    scale: np.ndarray
    big_m_mu: float
    big_m_nu: np.ndarray
    r_upper: np.ndarray

    @property
    def L(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_archive(cls, archive, utopian, relaxations=None, big_m_mu=None,
                     big_m_nu=None) -> "WeightSelectionModel":
        """Build from archived solutions (and optional extra ``(w, r)`` rows).

        Relaxation normals are rescaled into normalized coordinates, where
        ``w . r`` becomes ``(w * scale) . r' + const``.
        """
        if not archive:
            raise ContractError("weight selection needs a non-empty archive")
        pts = np.vstack([s.objectives for s in archive])
        pairs = [(s.weight, s.objectives) for s in archive]
        if relaxations:
            pairs += [(np.asarray(w, float), np.asarray(r, float)) for w, r in relaxations]
        points, z, scale = normalize_archive(pts, utopian)
        rw = np.vstack([w for w, _ in pairs]) * scale
        rw /= rw.sum(axis=1, keepdims=True).clip(RANGE_FLOOR)
        rp = (np.vstack([r for _, r in pairs]) - z) / scale
        m = pts.shape[1]
        r_upper = relaxation_upper_bound(rw, rp)
        # nu_j = r_low_j - sum_i mu_i r^i_j + xi <= r_upper_j + 1
        nu = r_upper + 1.0 if big_m_nu is None else np.broadcast_to(
            np.asarray(big_m_nu, dtype=float), (m,)).copy()
        return cls(
            points=points,
            relax_weights=rw,
            relax_points=rp,
            utopian=z,
            scale=scale,
            big_m_mu=float(m if big_m_mu is None else big_m_mu),
            big_m_nu=nu,
            r_upper=r_upper,
        )

    def to_original_weight(self, w_norm) -> np.ndarray:
        w = np.asarray(w_norm, dtype=float) / self.scale
        return w / w.sum()

    def to_original_point(self, r_norm) -> np.ndarray:
        return self.utopian + self.scale * np.asarray(r_norm, dtype=float)


def relaxation_upper_bound(relax_weights, relax_points) -> np.ndarray:
    """Per-objective bound on the minimal points of the relaxation region.

    The region ``{r >= 0, w^i . r >= w^i . r^i}`` only bounds ``r`` from
    below, yet some optimal ``r_low`` is always a minimal point of it (moving
    ``r_low`` down never shrinks the gap). At a minimal point each positive
    ``r_j`` has a tight row with ``w^i_j > 0``, so ``r_j <= max_i h_i / w^i_j``.
    """
    W = np.asarray(relax_weights, dtype=float)
    h = np.einsum("ij,ij->i", W, np.asarray(relax_points, dtype=float))
    ratio = np.where(W > COEF_FLOOR, h[:, None] / np.maximum(W, COEF_FLOOR), 0.0)
    return np.maximum(ratio.max(axis=0), 1.0)


class _Layout:
    """Column offsets of the MILP variables."""

    def __init__(self, m: int, L: int):
        self.m, self.L = m, L
        names = []
        self.w = self._block(names, "w", m)
        self.r = self._block(names, "r_low", m)
        self.v = self._block(names, "v", 1)[0]
        self.mu = self._block(names, "mu", L)
        self.nu = self._block(names, "nu", m)
        self.xi = self._block(names, "xi", 1)[0]
        self.mu_b = self._block(names, "mu_B", L)
        self.nu_b = self._block(names, "nu_B", m)
        self.names = names
        self.n = len(names)
        self.n_continuous = self.mu_b[0] if L else self.nu_b[0]

    @staticmethod
    def _block(names, label, size):
        start = len(names)
        names.extend(f"{label}[{k}]" for k in range(size))
        return list(range(start, start + size))


def build_weight_milp(model: WeightSelectionModel, duality_cut: bool = True) -> mip.MilpModel:
    """Linear-integer form of the weight-selection problem (maximize ``xi``).

    With ``duality_cut`` the row ``xi <= v`` is added. Every integer-feasible
    point has ``xi = v - w . r_low`` and ``w, r_low >= 0``, so the row cuts
    nothing off, but it tightens the big-M relaxation by a wide margin.
    """
    if model.L < 1:
        raise ContractError("weight selection needs a non-empty archive")
    m, L = model.m, model.L
    lay = _Layout(m, L)
    R = model.points
    rows, senses, rhs = [], [], []

    def row():
        return np.zeros(lay.n)

    # stationarity in w:  r_low - sum_i mu_i r^i - nu + xi 1 = 0
    for j in range(m):
        a = row()
        a[lay.r[j]] = 1.0
        a[lay.mu] = -R[:, j]
        a[lay.nu[j]] = -1.0
        a[lay.xi] = 1.0
        rows.append(a); senses.append(mip.EQ); rhs.append(0.0)
    # stationarity in v:  sum mu_i = 1
    a = row()
    a[lay.mu] = 1.0
    rows.append(a); senses.append(mip.EQ); rhs.append(1.0)
    # relaxation:  w^i . r_low >= w^i . r^i  (r_low >= utopian is a bound)
    for wi, ri in zip(model.relax_weights, model.relax_points):
        a = row()
        a[lay.r] = wi
        rows.append(a); senses.append(mip.GE); rhs.append(float(wi @ ri))
    # approximation:  v <= w . r^i
    for i in range(L):
        a = row()
        a[lay.v] = 1.0
        a[lay.w] = -R[i]
        rows.append(a); senses.append(mip.LE); rhs.append(0.0)
    # simplex
    a = row()
    a[lay.w] = 1.0
    rows.append(a); senses.append(mip.EQ); rhs.append(1.0)
    # complementarity  mu_i (w . r^i - v) = 0
    for i in range(L):
        a = row()
        a[lay.w] = R[i]
        a[lay.v] = -1.0
        a[lay.mu_b[i]] = -model.big_m_mu
        rows.append(a); senses.append(mip.LE); rhs.append(0.0)
        a = row()
        a[lay.mu[i]] = 1.0
        a[lay.mu_b[i]] = 1.0
        rows.append(a); senses.append(mip.LE); rhs.append(1.0)
    # complementarity  nu_j w_j = 0
    for j in range(m):
        a = row()
        a[lay.w[j]] = 1.0
        a[lay.nu_b[j]] = -1.0
        rows.append(a); senses.append(mip.LE); rhs.append(0.0)
        a = row()
        a[lay.nu[j]] = 1.0
        a[lay.nu_b[j]] = model.big_m_nu[j]
        rows.append(a); senses.append(mip.LE); rhs.append(float(model.big_m_nu[j]))
    if duality_cut:
        a = row()
        a[lay.xi] = 1.0
        a[lay.v] = -1.0
        rows.append(a); senses.append(mip.LE); rhs.append(0.0)

    # w <= 1 and mu <= 1 already follow from the complementarity rows
    lb = np.zeros(lay.n)
    ub = np.full(lay.n, np.inf)
    lb[lay.v] = -np.inf
    lb[lay.xi] = -np.inf
    ub[lay.mu_b] = 1.0
    ub[lay.nu_b] = 1.0
    ub[lay.r] = model.r_upper
    c = np.zeros(lay.n)
    c[lay.xi] = 1.0
    lp = mip.LinearProgram(c, np.array(rows), senses, np.array(rhs), lb, ub, lay.names)
    return mip.MilpModel(lp, lay.mu_b + lay.nu_b)


@dataclass
class WeightSelectionResult:
    """Solution of one weight-selection MILP.

    ``weight`` and ``r_low`` are in original objective units (``weight`` is
    what the oracle is called with). ``mu``, ``v`` and the multipliers are
    in normalized units, as are the ``normalized_*`` fields used by the
    KKT audit.
    """

    weight: np.ndarray
    mu: float
    r_low: np.ndarray
    v: float
    mu_duals: np.ndarray
    nu_duals: np.ndarray
    xi: float
    mu_binaries: np.ndarray
    nu_binaries: np.ndarray
    normalized_weight: np.ndarray
    normalized_r_low: np.ndarray
    model: WeightSelectionModel = field(repr=False)
    node_count: int = 0

    def kkt_residuals(self) -> dict[str, float]:
        R = self.model.points
        w, r = self.normalized_weight, self.normalized_r_low
        slack = R @ w - self.v
        return {
            "dual_sum": abs(self.mu_duals.sum() - 1.0),
            "stationarity": float(np.max(np.abs(
                r - self.mu_duals @ R - self.nu_duals + self.xi))),
            "complementarity_mu": float(np.max(np.abs(self.mu_duals * slack))),
            "complementarity_nu": float(np.max(np.abs(self.nu_duals * w))),
            "approximation": float(max(0.0, -slack.min())),
            "relaxation": float(max(0.0, np.max(
                np.einsum("ij,ij->i", self.model.relax_weights, self.model.relax_points)
                - self.model.relax_weights @ r))),
            "gap_identity": abs(self.mu - (self.v - w @ r)),
            "xi_identity": abs(self.mu - self.xi),
            "simplex": abs(w.sum() - 1.0) + float(max(0.0, -w.min())),
        }


def solve_selection_milp(model: WeightSelectionModel, solver=None):
    milp = build_weight_milp(model)
    solver = solver or mip.branch_and_bound
    return milp, solver(milp)


def next_weight(model: WeightSelectionModel, mip_solver=None) -> WeightSelectionResult:
    """Pick the weight whose relaxation/approximation gap is largest."""
    milp, res = solve_selection_milp(model, mip_solver)
    lay = _Layout(model.m, model.L)
    if res.status == mip.ITERATION_LIMIT:
        raise SelectionError("weight-selection MILP hit its node budget", incumbent=res)
    if res.status != mip.OPTIMAL:
        # w = any archive weight with r_low = its point is always feasible
        raise SelectionError(f"weight-selection MILP returned status {res.status!r}")
    x = res.values
    w_norm = np.clip(x[lay.w], 0.0, None)
    w_norm = w_norm / w_norm.sum()
    r_norm = x[lay.r]
    xi = float(x[lay.xi])
    return WeightSelectionResult(
        weight=model.to_original_weight(w_norm),
        mu=xi,
        r_low=model.to_original_point(r_norm),
        v=float(x[lay.v]),
        mu_duals=x[lay.mu],
        nu_duals=x[lay.nu],
        xi=xi,
        mu_binaries=np.round(x[lay.mu_b]),
        nu_binaries=np.round(x[lay.nu_b]),
        normalized_weight=w_norm,
        normalized_r_low=r_norm,
        model=model,
        node_count=res.node_count,
    )


def weight_gap(model: WeightSelectionModel, weight) -> float:
    """Relaxation/approximation gap at a fixed weight, in normalized units.

    ``weight`` is in original units. The gap is
    ``min_i w . r^i - min {w . r : r in relaxation}``, one LP, and is what
    the selection MILP maximizes over ``w``.
    """
    w = as_weight(weight) * model.scale
    w = w / w.sum()
    m = model.m
    rw, rp = model.relax_weights, model.relax_points
    lp = mip.LinearProgram(
        -w, rw, [mip.GE] * len(rw), np.einsum("ij,ij->i", rw, rp),
        np.zeros(m), np.full(m, np.inf))
    res = mip.simplex_solve(lp)
    if res.status != mip.OPTIMAL:
        raise SelectionError(f"relaxation LP returned status {res.status!r}")
    return float((model.points @ w).min() + res.objective)


class MoniseRun:
    """Outer MONISE loop. ``results`` keeps every selection result in order."""

    def __init__(self, problem: OracleProblem, mu_stop: float = 1e-3,
                 max_iter: int | None = None, mip_solver=None, utopian_offset: float = 0.0,
                 initial_weight=None):
        if problem.m < 2:
            raise ContractError("MONISE needs m >= 2")
        if mu_stop <= 0:
            raise ContractError("mu_stop must be positive")
        self.problem = problem
        self.mu_stop = mu_stop
        self.max_iter = 5 * problem.m if max_iter is None else max_iter
        self.mip_solver = mip_solver
        self.utopian_offset = utopian_offset
        self.initial_weight = (np.full(problem.m, 1.0 / problem.m) if initial_weight is None
                               else as_weight(initial_weight))
        self.frontier = Frontier()
        self.results: list[WeightSelectionResult] = []
        self.weights: list[np.ndarray] = []
        self._repeat_rows: list[tuple[np.ndarray, np.ndarray]] = []

    def _solve(self, w) -> WeightedSolution:
        t0 = time.perf_counter()
        try:
            return self.problem.solve_weighted(w)
        except OracleError as exc:
            self.frontier.status = "failed"
            raise OracleError(str(exc), partial=self.frontier) from exc
        finally:
            self.frontier.oracle_seconds += time.perf_counter() - t0

    def _record(self, sol: WeightedSolution) -> None:
        if not self.frontier.add(sol, DEDUP_TOL):
            self._repeat_rows.append((sol.weight, sol.objectives))

    def _select(self) -> WeightSelectionResult:
        fr = self.frontier
        t0 = time.perf_counter()
        try:
            return next_weight(self.selection_model(), self.mip_solver)
        except SelectionError as exc:
            fr.status = "timeout" if exc.incumbent is not None else "failed"
            exc.partial = fr
            raise
        finally:
            fr.selection_seconds += time.perf_counter() - t0

    def selection_model(self) -> WeightSelectionModel:
        fr = self.frontier
        return WeightSelectionModel.from_archive(fr.solutions, fr.utopian, self._repeat_rows)

    def initialize(self) -> None:
        """Individual minima, utopian point and the seed solve."""
        fr = self.frontier
        t0 = time.perf_counter()
        try:
            minima = individual_minima(self.problem)
        except OracleError as exc:
            fr.status = "failed"
            raise OracleError(str(exc), partial=fr) from exc
        finally:
            fr.oracle_seconds += time.perf_counter() - t0
        fr.utopian = np.array([s.objectives[k] for k, s in enumerate(minima)]) - self.utopian_offset
        for sol in minima:
            self._record(sol)
        self.issue(self.initial_weight)

    def select(self) -> WeightSelectionResult:
        """Solve the selection MILP on the current archive and log its mu."""
        sel = self._select()
        self.results.append(sel)
        self.frontier.mu_history.append(sel.mu)
        return sel

    def issue(self, weight) -> WeightedSolution:
        """Call the oracle at ``weight`` and archive the result."""
        weight = as_weight(weight)
        self.weights.append(weight)
        sol = self._solve(weight)
        self._record(sol)
        return sol

    def run(self) -> Frontier:
        fr = self.frontier
        self.initialize()
        iterations = 0
        while True:
            sel = self.select()
            if sel.mu <= self.mu_stop:
                fr.status = "converged"
                break
            if iterations >= self.max_iter:
                fr.status = "max_iter"
                break
            self.issue(sel.weight)
            iterations += 1
        return fr


def run_monise(problem: OracleProblem, mu_stop: float = 1e-3, max_iter: int | None = None,
               mip_solver=None) -> Frontier:
    return MoniseRun(problem, mu_stop, max_iter, mip_solver).run()
