"""Benchmark oracles: multi-objective 0/1 knapsack, quadratic on the simplex,
and a shared-parameter multilabel logistic model.

Each problem exposes ``m`` and ``solve_weighted(w)`` returning an exact (or
tolerance-bounded, for the logistic model) minimizer of ``w . f(x)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ContractError, OracleError, WeightedSolution, as_weight


def _check_weight(w, m: int) -> np.ndarray:
    w = as_weight(w)
    if w.size != m:
        raise ContractError(f"weight has {w.size} entries, problem has m={m}")
    return w


# ---------------------------------------------------------------------------
# knapsack


@dataclass
class KnapsackInstance:
    """0/1 knapsack with ``m`` utility values per item (all maximized).

    ``values`` has shape ``(q, m)``. The oracle reports objectives negated so
    the whole toolkit can stay in minimization form.
    """

    sizes: np.ndarray
    values: np.ndarray
    capacity: int
    seed: int | None = None

    def __post_init__(self):
        sizes = np.asarray(self.sizes)
        values = np.asarray(self.values)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        for name, arr in (("sizes", sizes), ("values", values)):
            if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ContractError(f"knapsack {name} must be integers")
        if int(self.capacity) != self.capacity:
            raise ContractError("knapsack capacity must be an integer")
        if np.any(sizes < 0) or np.any(values < 0) or self.capacity < 0:
            raise ContractError("knapsack data must be nonnegative")
        if values.shape[0] != sizes.size:
            raise ContractError("values must have one row per item")
        self.sizes = sizes.astype(np.int64)
        self.values = values.astype(np.int64)
        self.capacity = int(self.capacity)

    @property
    def q(self) -> int:
        return self.sizes.size

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def objectives(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        return -(self.values.T @ x).astype(float)

    def feasible(self, x) -> bool:
        return int(self.sizes @ np.asarray(x, dtype=np.int64)) <= self.capacity

    def solve_weighted(self, w) -> WeightedSolution:
        w = _check_weight(w, self.m)
        return knapsack_weighted_solve(self, w)

    def to_dict(self) -> dict:
        return {
            "type": "knapsack",
            "m": self.m,
            "q": self.q,
            "sizes": self.sizes.tolist(),
            "values": self.values.tolist(),
            "capacity": self.capacity,
            "seed": self.seed,
        }


def knapsack_generate(q: int, m: int, c: float, seed: int) -> KnapsackInstance:
    """Uniform integer sizes and values in [0, 1000], capacity ``round(500 q c)``.

    Objectives are drawn independently; no anti-correlation is imposed.
    """
    if q < 1 or m < 2:
        raise ContractError("knapsack_generate needs q >= 1 and m >= 2")
    if not 0.0 <= c <= 1.0:
        raise ContractError("coverage c must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    sizes = rng.integers(0, 1001, size=q)
    values = rng.integers(0, 1001, size=(q, m))
    return KnapsackInstance(sizes, values, int(round(500 * q * c)), seed)


def knapsack_weighted_solve(inst: KnapsackInstance, w) -> WeightedSolution:
    """Exact DP over integer capacity for ``max sum_i (w . v_i) x_i``."""
    w = as_weight(w)
    scores = inst.values @ w
    cap = inst.capacity
    dp = np.zeros(cap + 1)
    take = np.zeros((inst.q, cap + 1), dtype=bool)
    for i in range(inst.q):
        t = int(inst.sizes[i])
        if t > cap or scores[i] <= 0.0:
            continue
        cand = np.full(cap + 1, -np.inf)
        cand[t:] = dp[: cap + 1 - t] + scores[i]
        better = cand > dp
        take[i] = better
        dp = np.where(better, cand, dp)
    x = np.zeros(inst.q, dtype=np.int64)
    room = cap
    for i in range(inst.q - 1, -1, -1):
        if take[i, room]:
            x[i] = 1
            room -= int(inst.sizes[i])
    objectives = inst.objectives(x)
    return WeightedSolution(w, objectives, x, float(w @ objectives))


# ---------------------------------------------------------------------------
# quadratic on the simplex


@dataclass
class QuadraticSimplexProblem:
    """minimize ``[x_1^2, ..., x_m^2]`` subject to ``sum(x) = 1``."""

    m: int = 3

    def __post_init__(self):
        if self.m < 2:
            raise ContractError("quadratic problem needs m >= 2")

    def decision(self, w) -> np.ndarray:
        w = _check_weight(w, self.m)
        zero = w <= 0.0
        if zero.any():
            # limit of the closed form as the zero weights shrink together
            return zero / zero.sum()
        inv = 1.0 / w
        return inv / inv.sum()

    def solve_weighted(self, w) -> WeightedSolution:
        return quadratic_weighted_solve(self, w)

    def to_dict(self) -> dict:
        return {"type": "quadratic", "m": self.m}


def quadratic_weighted_solve(prob: QuadraticSimplexProblem, w) -> WeightedSolution:
    w = _check_weight(w, prob.m)
    x = prob.decision(w)
    f = x**2
    return WeightedSolution(w, f, x, float(w @ f))


# ---------------------------------------------------------------------------
# multilabel logistic


@dataclass
class MultilabelInstance:
    """Features ``X`` (n, d) and binary labels ``Y`` (n, L).

    One parameter vector ``theta`` of length d + 1 is shared by every label.
    Objectives are the L per-label logistic losses followed by ``||theta||_2``.
    """

    X: np.ndarray
    Y: np.ndarray
    seed: int | None = None
    tol: float = 1e-6
    max_iter: int = 10000
    _phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.asarray(self.Y, dtype=float).reshape(self.X.shape[0], -1)
        if not np.all((self.Y == 0) | (self.Y == 1)):
            raise ContractError("labels must be 0 or 1")
        if min(self.X.shape + self.Y.shape) < 1:
            raise ContractError("n, d and L must all be >= 1")
        self._phi = np.hstack([self.X, np.ones((self.X.shape[0], 1))])

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def L(self) -> int:
        return self.Y.shape[1]

    @property
    def m(self) -> int:
        return self.L + 1

    def losses(self, theta) -> np.ndarray:
        z = self._phi @ np.asarray(theta, dtype=float)
        # -[y log s(z) + (1 - y) log(1 - s(z))] = softplus(z) - y z
        soft = np.logaddexp(0.0, z)
        return soft.sum() - self.Y.T @ z

    def loss_gradients(self, theta) -> np.ndarray:
        """(L, d + 1) matrix; row l is the gradient of loss l."""
        z = self._phi @ np.asarray(theta, dtype=float)
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        return (s[:, None] - self.Y).T @ self._phi

    def objectives(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.append(self.losses(theta), np.linalg.norm(theta))

    def weighted_value(self, theta, w) -> float:
        return float(np.asarray(w) @ self.objectives(theta))

    def weighted_gradient(self, theta, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        theta = np.asarray(theta, dtype=float)
        g = w[:-1] @ self.loss_gradients(theta)
        nrm = np.linalg.norm(theta)
        if nrm > 0:
            g = g + w[-1] * theta / nrm
        return g

    def solve_weighted(self, w) -> WeightedSolution:
        return logistic_weighted_solve(self, w, self.tol, self.max_iter)

    def to_dict(self) -> dict:
        return {
            "type": "multilabel",
            "n": self.n,
            "d": self.d,
            "L": self.L,
            "X": self.X.tolist(),
            "Y": self.Y.astype(int).tolist(),
            "seed": self.seed,
        }


def logistic_weighted_solve(inst: MultilabelInstance, w, tol: float = 1e-6,
                            max_iter: int = 10000) -> WeightedSolution:
    """Gradient descent with Armijo backtracking on the weighted objective.

    The norm term is non-differentiable only at the origin; the origin is
    returned directly when zero lies in the subdifferential there.
    """
    w = _check_weight(w, inst.m)
    dim = inst.d + 1
    g_loss0 = w[:-1] @ inst.loss_gradients(np.zeros(dim))
    if np.linalg.norm(g_loss0) <= w[-1] + tol:
        theta = np.zeros(dim)
        f = inst.objectives(theta)
        return WeightedSolution(w, f, theta, float(w @ f))

    theta = -g_loss0 / max(np.linalg.norm(g_loss0), 1.0) * 1e-3
    value = inst.weighted_value(theta, w)
    grad = inst.weighted_gradient(theta, w)
    step = 1.0
    prev = None
    for _ in range(max_iter):
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol:
            break
        if prev is not None:
            # Barzilai-Borwein guess for the trial step
            s, y = theta - prev[0], grad - prev[1]
            sy = float(s @ y)
            if sy > 0:
                step = float(s @ s) / sy
        while True:
            trial = theta - step * grad
            tv = inst.weighted_value(trial, w)
            if tv <= value - 1e-4 * step * gnorm**2:
                break
            step *= 0.5
            if step < 1e-20:
                raise OracleError(
                    f"line search failed (gradient norm {gnorm:.3g})", partial=theta
                )
        prev = (theta, grad)
        theta, value = trial, tv
        grad = inst.weighted_gradient(theta, w)
    else:
        raise OracleError(
            f"no convergence in {max_iter} iterations (gradient norm "
            f"{np.linalg.norm(grad):.3g})",
            partial=theta,
        )
    f = inst.objectives(theta)
    return WeightedSolution(w, f, theta, float(w @ f))


def synthetic_multilabel_generate(n: int, d: int, L: int, seed: int,
                                  noise: float = 0.05) -> MultilabelInstance:
    """Standard-normal features, labels from random linear classifiers plus noise."""
    if min(n, d, L) < 1:
        raise ContractError("n, d and L must all be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    phi = np.hstack([X, np.ones((n, 1))])
    coef = rng.standard_normal((d + 1, L))
    Y = (phi @ coef > 0).astype(int)
    flip = rng.random((n, L)) < noise
    Y = np.where(flip, 1 - Y, Y)
    return MultilabelInstance(X, Y, seed)


# ---------------------------------------------------------------------------
# serialization


def problem_from_dict(data: dict):
    kind = data.get("type")
    if kind == "knapsack":
        values = np.asarray(data["values"]).reshape(int(data["q"]), int(data["m"]))
        return KnapsackInstance(data["sizes"], values, data["capacity"], data.get("seed"))
    if kind == "multilabel":
        X = np.asarray(data["X"], dtype=float).reshape(int(data["n"]), int(data["d"]))
        Y = np.asarray(data["Y"]).reshape(int(data["n"]), int(data["L"]))
        return MultilabelInstance(X, Y, data.get("seed"))
    if kind == "quadratic":
        return QuadraticSimplexProblem(int(data["m"]))
    raise ContractError(f"unknown problem type {kind!r}")


def save_problem(problem, path) -> None:
    Path(path).write_text(json.dumps(problem.to_dict()))


def load_problem(path):
    return problem_from_dict(json.loads(Path(path).read_text()))
