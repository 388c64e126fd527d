"""Independent reference computations used only by the tests.

Everything here is deliberately naive (enumeration, inclusion-exclusion,
finite differences) so it shares no code path with the library.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


def hv_inclusion_exclusion(points, reference) -> float:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ref = np.asarray(reference, dtype=float)
    total = 0.0
    for k in range(1, len(pts) + 1):
        for subset in itertools.combinations(range(len(pts)), k):
            corner = pts[list(subset)].max(axis=0)
            total += (-1) ** (k + 1) * np.prod(np.clip(ref - corner, 0.0, None))
    return float(total)


def pareto_bruteforce(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    keep = []
    for i, a in enumerate(pts):
        dominated = False
        for j, b in enumerate(pts):
            if i != j and np.all(b <= a) and np.any(b < a):
                dominated = True
                break
        keep.append(not dominated)
    return pts[np.array(keep, dtype=bool)] if len(pts) else pts


def knapsack_enumerate(sizes, values, capacity, w):
    """Best weighted utility over all 2^q subsets; returns (value, objectives)."""
    sizes = np.asarray(sizes)
    values = np.asarray(values).reshape(len(sizes), -1)
    q = len(sizes)
    subsets = ((np.arange(2**q)[:, None] >> np.arange(q)) & 1).astype(np.int64)
    feasible = subsets @ sizes <= capacity
    utilities = subsets[feasible] @ values
    scores = utilities @ np.asarray(w, dtype=float)
    best = int(np.argmax(scores))
    return float(scores[best]), -utilities[best].astype(float)


def lp_vertex_max(c, A, senses, b, lb, ub):
    """Maximize c.x by trying every basic solution (small bounded LPs only).

    Returns ``None`` when no vertex is feasible.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    rows, rhs, kinds = [], [], []
    for a, s, v in zip(np.atleast_2d(A), senses, b):
        rows.append(np.asarray(a, float)); rhs.append(float(v)); kinds.append(s)
    for j in range(n):
        e = np.zeros(n); e[j] = 1.0
        if np.isfinite(lb[j]):
            rows.append(e); rhs.append(float(lb[j])); kinds.append(">=")
        if np.isfinite(ub[j]):
            rows.append(e); rhs.append(float(ub[j])); kinds.append("<=")
    R = np.array(rows); h = np.array(rhs)
    eq = [i for i, k in enumerate(kinds) if k == "=="]
    others = [i for i in range(len(kinds)) if kinds[i] != "=="]
    best = None
    for extra in itertools.combinations(others, n - len(eq)):
        idx = eq + list(extra)
        M = R[idx]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, h[idx])
        ok = True
        for a, k, v in zip(R, kinds, h):
            lhs = a @ x
            tol = 1e-8 * max(1.0, abs(v))
            if (k == "<=" and lhs > v + tol) or (k == ">=" and lhs < v - tol) or \
                    (k == "==" and abs(lhs - v) > tol):
                ok = False
                break
        if ok:
            val = float(c @ x)
            best = val if best is None else max(best, val)
    return best


def scipy_lp_max(c, A, senses, b, lb, ub):
    """Second opinion from scipy's HiGHS; returns (status, objective)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for a, s, v in zip(A, senses, b):
        if s == "<=":
            A_ub.append(a); b_ub.append(v)
        elif s == ">=":
            A_ub.append(-a); b_ub.append(-v)
        else:
            A_eq.append(a); b_eq.append(v)
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(lb, ub)]
    res = linprog(-np.asarray(c, float),
                  A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                  bounds=bounds, method="highs")
    return res.status, (-res.fun if res.status == 0 else None)


def milp_by_fixing(model, simplex_solve):
    """Best objective over every 0/1 fixing of the binaries, each an LP."""
    lp = model.lp
    best = None
    k = len(model.binary_indices)
    for bits in itertools.product((0.0, 1.0), repeat=k):
        lb, ub = lp.lb.copy(), lp.ub.copy()
        lb[model.binary_indices] = bits
        ub[model.binary_indices] = bits
        res = simplex_solve(lp.with_bounds(lb, ub))
        if res.status == "optimal":
            best = res.objective if best is None else max(best, res.objective)
    return best


def inner_gap(points, r_low) -> float:
    """max over simplex w of min_i w.(r^i - r_low), an LP solved with scipy."""
    P = np.asarray(points, dtype=float)
    m = P.shape[1]
    # variables (w, t); maximize t s.t. t <= w.(r^i - r_low)
    c = np.zeros(m + 1); c[-1] = -1.0
    A_ub = np.hstack([-(P - r_low), np.ones((len(P), 1))])
    A_eq = np.append(np.ones(m), 0.0)[None]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(P)), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    assert res.status == 0
    return -res.fun


def mu_by_vertices(points, relax_weights, relax_points) -> float:
    """Exact weight-selection optimum in normalized units.

    The gap max_w min_i w.(r^i - r) is convex in r, so its maximum over the
    relaxation polyhedron {r >= 0, w^k.r >= w^k.r^k} sits at a vertex; every
    vertex is found by enumerating m active constraints.
    """
    P = np.asarray(points, dtype=float)
    m = P.shape[1]
    rows = [np.asarray(w, float) for w in relax_weights]
    rhs = [float(w @ r) for w, r in zip(relax_weights, relax_points)]
    for j in range(m):
        e = np.zeros(m); e[j] = 1.0
        rows.append(e); rhs.append(0.0)
    R = np.array(rows); h = np.array(rhs)
    best = -np.inf
    for idx in itertools.combinations(range(len(R)), m):
        M = R[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, h[list(idx)])
        if np.all(R @ v >= h - 1e-9):
            best = max(best, inner_gap(P, v))
    return best


def central_gradient(f, x, h=1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x); e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def quadratic_closed_form(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    x = (1.0 / w) / np.sum(1.0 / w)
    return x**2
