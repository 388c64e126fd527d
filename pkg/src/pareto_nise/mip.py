"""Small dense LP simplex and binary branch-and-bound.

Sized for the weight-selection MILPs (tens of variables, a few dozen
binaries). Robustness is preferred over speed: two-phase tableau simplex,
Dantzig pricing that falls back to Bland's rule after a run of degenerate
pivots, and best-bound node selection.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

FEAS_TOL = 1e-7
INT_TOL = 1e-6
PIVOT_TOL = 1e-9
DEGENERATE_TOL = 1e-9
HARRIS_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

LE, EQ, GE = "<=", "==", ">="


@dataclass
class LinearProgram:
    """``maximize c.x`` subject to rows and per-variable bounds.

    Rows are ``(coefficients, relation, rhs)`` with relation one of
    ``"<="``, ``"=="``, ``">="``. Bounds default to ``[0, inf)``.
    """

    c: np.ndarray
    A: np.ndarray
    senses: list[str]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.lb = np.asarray(self.lb, dtype=float).reshape(n)
        self.ub = np.asarray(self.ub, dtype=float).reshape(n)
        self.senses = list(self.senses)
        if len(self.senses) != self.A.shape[0] or self.b.size != self.A.shape[0]:
            raise ValueError("rows, senses and rhs disagree in length")
        bad = [s for s in self.senses if s not in (LE, EQ, GE)]
        if bad:
            raise ValueError(f"unknown row relation(s): {bad}")
        if np.any(self.lb > self.ub):
            raise ValueError("some lower bound exceeds its upper bound")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A))
                and np.all(np.isfinite(self.b))):
            raise ValueError("LP coefficients must be finite")

    @property
    def n(self) -> int:
        return self.c.size

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.senses, self.b, lb, ub, self.names)

    def max_violation(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        viol = [0.0]
        if self.A.size:
            ax = self.A @ x
            for val, sense, rhs in zip(ax, self.senses, self.b):
                if sense == LE:
                    viol.append(val - rhs)
                elif sense == GE:
                    viol.append(rhs - val)
                else:
                    viol.append(abs(val - rhs))
        viol.append(float(np.max(self.lb - x, initial=0.0)))
        viol.append(float(np.max(x - self.ub, initial=0.0)))
        return max(viol)

    def dump(self) -> str:
        """Human-readable listing, one constraint per line (debug aid only)."""
        names = self.names or [f"x{j}" for j in range(self.n)]

        def expr(coefs):
            terms = [f"{v:+g} {names[j]}" for j, v in enumerate(coefs) if v != 0]
            return " ".join(terms) or "0"

        lines = [f"maximize {expr(self.c)}", "subject to"]
        for i, (row, sense, rhs) in enumerate(zip(self.A, self.senses, self.b)):
            lines.append(f"  r{i}: {expr(row)} {sense} {rhs:g}")
        lines.append("bounds")
        for j in range(self.n):
            lines.append(f"  {self.lb[j]:g} <= {names[j]} <= {self.ub[j]:g}")
        return "\n".join(lines)


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    dual_gap: float = float("nan")
    iterations: int = 0


@dataclass
class MilpModel:
    lp: LinearProgram
    binary_indices: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.binary_indices = sorted(set(int(j) for j in self.binary_indices))
        for j in self.binary_indices:
            if self.lp.lb[j] < 0 or self.lp.ub[j] > 1:
                raise ValueError(f"binary variable {j} must have bounds within [0, 1]")


@dataclass
class MilpResult:
    status: str
    values: np.ndarray | None = None
    objective_value: float = float("nan")
    node_count: int = 0
    incumbent_history: list[float] = field(default_factory=list)


class _StandardForm:
    """``max c.y  s.t.  A y (rel) b,  y >= 0`` derived from a LinearProgram.

    Each original variable becomes ``x = offset + sign * y_pos - y_neg``;
    finite upper bounds turn into extra ``<=`` rows.
    """

    def __init__(self, lp: LinearProgram):
        n = lp.n
        cols = []  # (original index, coefficient)
        self.offset = np.zeros(n)
        extra_rows = []
        for j in range(n):
            lo, hi = lp.lb[j], lp.ub[j]
            if np.isfinite(lo) and np.isfinite(hi) and hi - lo <= 0:
                self.offset[j] = lo
            elif np.isfinite(lo):
                self.offset[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    extra_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                self.offset[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        self.cols = cols
        k = len(cols)
        T = np.zeros((n, k))
        for col, (j, s) in enumerate(cols):
            T[j, col] = s
        self.T = T  # x = offset + T y
        A = lp.A @ T if lp.A.size else np.zeros((0, k))
        b = lp.b - (lp.A @ self.offset if lp.A.size else 0.0)
        senses = list(lp.senses)
        if extra_rows:
            E = np.zeros((len(extra_rows), k))
            for r, (col, cap) in enumerate(extra_rows):
                E[r, col] = 1.0
            A = np.vstack([A, E])
            b = np.concatenate([b, [cap for _, cap in extra_rows]])
            senses += [LE] * len(extra_rows)
        self.n_orig_rows = lp.A.shape[0]
        self.A = A
        self.b = np.asarray(b, dtype=float)
        self.senses = senses
        self.c = lp.c @ T
        self.const = float(lp.c @ self.offset)

    def recover(self, y: np.ndarray) -> np.ndarray:
        return self.offset + self.T @ y


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    pivot_row = tab[row]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    touched = np.nonzero(factors)[0]
    tab[touched] -= factors[touched, None] * pivot_row
    rhs = tab[:-1, -1]
    rhs[np.abs(rhs) < 1e-12] = 0.0


def _run_simplex(tab, basis, n_cols, max_iter, bland_after, counter):
    """Maximize over the objective stored (negated) in the last tableau row.

    Only the first ``n_cols`` columns may enter. After ``bland_after``
    consecutive degenerate pivots the rest of the solve uses Bland's rule.
    Returns a status string.
    """
    streak = 0
    bland = False
    m = tab.shape[0] - 1
    while True:
        if counter[0] >= max_iter:
            return ITERATION_LIMIT
        obj = tab[-1, :n_cols]
        if bland:
            candidates = np.nonzero(obj < -PIVOT_TOL)[0]
            if candidates.size == 0:
                return OPTIMAL
            col = int(candidates[0])
        else:
            col = int(np.argmin(obj))
            if obj[col] >= -PIVOT_TOL:
                return OPTIMAL
        column = tab[:m, col]
        positive = column > PIVOT_TOL
        if not positive.any():
            return UNBOUNDED
        rows = np.nonzero(positive)[0]
        rhs = np.maximum(tab[rows, -1], 0.0)
        ratios = rhs / column[rows]
        best = ratios.min()
        if bland:
            ties = rows[ratios <= best + 1e-12]
            row = int(min(ties, key=lambda r: basis[r]))
        else:
            # Harris: largest pivot element within a slightly relaxed step
            relaxed = ((rhs + HARRIS_TOL) / column[rows]).min()
            ties = rows[ratios <= relaxed]
            row = int(ties[np.argmax(column[ties])])
        if best <= DEGENERATE_TOL:
            streak += 1
            bland = bland or streak >= bland_after
        else:
            streak = 0
        _pivot(tab, row, col)
        basis[row] = col
        counter[0] += 1


def _append_fixing_row(M, b, c, col, value):
    rows, cols = M.shape
    new_m = np.zeros((rows + 1, cols + 1))
    new_m[:rows, :cols] = M
    new_m[rows, col] = 1.0
    new_m[rows, cols] = 1.0 if value == 0.0 else -1.0
    return new_m, np.append(b, value), np.append(c, 0.0)


class _Tableau:
    """Optimal (or final) tableau of an equality system ``M z = b, z >= 0``.

    Columns are the standard-form structurals followed by slacks. ``M``,
    ``b`` and ``c`` are kept so the tableau can be rebuilt from a basis.
    """

    def __init__(self, tab, basis, M, b, c, n_struct):
        self.tab = tab
        self.basis = basis
        self.M = M
        self.b = b
        self.c = c
        self.n_struct = n_struct

    @classmethod
    def from_basis(cls, M, b, c, basis, n_struct):
        B = M[:, basis]
        body = np.linalg.solve(B, np.hstack([M, b[:, None]]))
        obj = c[basis] @ body
        obj[:-1] -= c
        tab = np.vstack([body, obj])
        rhs = tab[:-1, -1]
        rhs[np.abs(rhs) < 1e-12] = 0.0
        return cls(tab, list(basis), M, b, c, n_struct)

    def copy(self) -> "_Tableau":
        return _Tableau(self.tab.copy(), list(self.basis), self.M, self.b, self.c,
                        self.n_struct)

    def primal(self) -> np.ndarray:
        z = np.zeros(self.M.shape[1])
        z[self.basis] = self.tab[:-1, -1]
        return np.clip(z, 0.0, None)

    def add_fixing(self, col: int, value: float) -> None:
        """Append the row ``z[col] <= 0`` (value 0) or ``z[col] >= 1`` (value 1)."""
        cols = self.M.shape[1]
        sign = 1.0 if value == 0.0 else -1.0
        self.M, self.b, self.c = _append_fixing_row(self.M, self.b, self.c, col, value)

        tab = self.tab
        width = tab.shape[1]
        grown = np.zeros((tab.shape[0] + 1, width + 1))
        grown[:-2, :cols] = tab[:-1, :cols]
        grown[:-2, -1] = tab[:-1, -1]
        grown[-1, :cols] = tab[-1, :cols]
        grown[-1, -1] = tab[-1, -1]
        new_row = np.zeros(width + 1)
        new_row[col] = 1.0
        new_row[cols] = sign
        new_row[-1] = value
        if col in self.basis:
            r = self.basis.index(col)
            new_row -= grown[r]
        if sign < 0:
            new_row = -new_row
        grown[-2] = new_row
        self.tab = grown
        self.basis.append(cols)

    def dual_simplex(self, max_iter: int, counter, bland_after: int = 50) -> str:
        """Dual simplex from a dual-feasible tableau.

        A long degenerate streak first triggers a small random perturbation
        of the nonbasic reduced costs; a second streak switches to Bland's
        rule. The true objective row is restored before returning.
        """
        tab = self.tab
        n_cols = tab.shape[1] - 1
        streak = 0
        bland = perturbed = False
        status = None
        while status is None:
            rhs = tab[:-1, -1]
            if bland:
                infeasible = np.nonzero(rhs < -FEAS_TOL)[0]
                if infeasible.size == 0:
                    status = OPTIMAL
                    break
                r = int(min(infeasible, key=lambda i: self.basis[i]))
            else:
                r = int(np.argmin(rhs))
                if rhs[r] >= -FEAS_TOL:
                    status = OPTIMAL
                    break
            if counter[0] >= max_iter:
                status = ITERATION_LIMIT
                break
            row = tab[r, :n_cols]
            cand = np.nonzero(row < -PIVOT_TOL)[0]
            if cand.size == 0:
                status = INFEASIBLE
                break
            reduced = np.maximum(tab[-1, cand], 0.0)
            ratios = reduced / -row[cand]
            best = ratios.min()
            if bland:
                col = int(cand[ratios <= best + 1e-12][0])
            else:
                relaxed = ((reduced + HARRIS_TOL) / -row[cand]).min()
                ties = cand[ratios <= relaxed]
                col = int(ties[np.argmin(row[ties])])
            if best <= DEGENERATE_TOL:
                streak += 1
                if streak >= bland_after:
                    if not perturbed:
                        nonbasic = np.ones(n_cols, dtype=bool)
                        nonbasic[self.basis] = False
                        rng = np.random.default_rng(counter[0])
                        tab[-1, :n_cols][nonbasic] += rng.uniform(1e-7, 2e-7, nonbasic.sum())
                        perturbed = True
                        streak = 0
                        continue
                    bland = True
            else:
                streak = 0
            _pivot(tab, r, col)
            self.basis[r] = col
            counter[0] += 1
        if perturbed:
            obj = self.c[self.basis] @ tab[:-1]
            obj[:-1] -= self.c
            tab[-1] = obj
        return status

    def reoptimize(self, max_iter: int, bland_after: int, counter) -> str:
        status = self.dual_simplex(max_iter, counter, bland_after)
        if status != OPTIMAL:
            return status
        # mop up reduced costs that drifted negative
        return _run_simplex(self.tab, self.basis, self.tab.shape[1] - 1,
                            max_iter, bland_after, counter)


def _solve_standard(sf: _StandardForm, max_iter: int, bland_after: int):
    """Two-phase simplex on a standard form. Returns ``(status, tableau, rows, iterations)``.

    ``rows`` lists the standard-form rows kept (redundant equalities are
    dropped) together with the sign each was multiplied by.
    """
    A, b, senses = sf.A.copy(), sf.b.copy(), list(sf.senses)
    m, k = A.shape
    row_sign = np.ones(m)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            row_sign[i] = -1.0
            senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]

    n_slack = sum(1 for s in senses if s != EQ)
    n_art = sum(1 for s in senses if s != LE)
    n_total = k + n_slack + n_art
    tab = np.zeros((m + 1, n_total + 1))
    tab[:m, :k] = A
    tab[:m, -1] = b
    basis = [-1] * m
    slack_col, art_col = k, k + n_slack
    art_cols = []
    for i, s in enumerate(senses):
        if s == LE:
            tab[i, slack_col] = 1.0
            basis[i] = slack_col
            slack_col += 1
        else:
            if s == GE:
                tab[i, slack_col] = -1.0
                slack_col += 1
            tab[i, art_col] = 1.0
            basis[i] = art_col
            art_cols.append(art_col)
            art_col += 1
    M_full = tab[:m, : k + n_slack].copy()

    counter = [0]
    keep = list(range(m))
    if art_cols:
        # phase 1: maximize -sum(artificials)
        tab[-1, :] = 0.0
        tab[-1, art_cols] = 1.0
        for i, bcol in enumerate(basis):
            if bcol in art_cols:
                tab[-1] -= tab[i]
        status = _run_simplex(tab, basis, n_total, max_iter, bland_after, counter)
        if status == ITERATION_LIMIT:
            return ITERATION_LIMIT, None, None, counter[0]
        if tab[-1, -1] < -FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return INFEASIBLE, None, None, counter[0]
        # drive artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= k + n_slack:
                row = tab[i, : k + n_slack]
                cand = np.nonzero(np.abs(row) > 1e-9)[0]
                if cand.size:
                    j = int(cand[np.argmax(np.abs(row[cand]))])
                    _pivot(tab, i, j)
                    basis[i] = j
                    keep.append(i)
            else:
                keep.append(i)
        tab = np.vstack([tab[keep], tab[-1:]])
        basis = [basis[i] for i in keep]
        tab = np.delete(tab, range(k + n_slack, n_total), axis=1)
        n_total = k + n_slack

    c_full = np.concatenate([sf.c, np.zeros(n_slack)])
    tab[-1, :] = 0.0
    tab[-1, :k] = -sf.c
    for i, bcol in enumerate(basis):
        if tab[-1, bcol] != 0.0:
            tab[-1] -= tab[-1, bcol] * tab[i]
    status = _run_simplex(tab, basis, n_total, max_iter, bland_after, counter)
    if status != OPTIMAL:
        return status, None, None, counter[0]
    tableau = _Tableau(tab, basis, M_full[keep], b[keep], c_full, k)
    return OPTIMAL, tableau, (keep, row_sign), counter[0]


def _lp_result(lp: LinearProgram, sf: _StandardForm, tableau: _Tableau,
               rows, iterations: int) -> LpResult:
    z = tableau.primal()
    x = sf.recover(z[: tableau.n_struct])
    objective = float(lp.c @ x)
    duals = np.zeros(sf.A.shape[0])
    dual_gap = float("nan")
    B = tableau.M[:, tableau.basis]
    try:
        yd = np.linalg.solve(B.T, tableau.c[tableau.basis])
        dual_gap = abs(float(tableau.b @ yd) + sf.const - objective)
        if rows is not None:
            keep, row_sign = rows
            duals[keep] = yd[: len(keep)] * row_sign[keep]
    except np.linalg.LinAlgError:
        pass
    return LpResult(OPTIMAL, x, objective, duals[: sf.n_orig_rows], dual_gap, iterations)


def simplex_solve(lp: LinearProgram, max_iter: int = 5000, bland_after: int = 50) -> LpResult:
    """Solve ``lp`` with the two-phase dense tableau method.

    ``duals`` are the row multipliers read off the final basis and
    ``dual_gap`` is ``|b.y - c.x|`` for them.
    """
    sf = _StandardForm(lp)
    status, tableau, rows, iterations = _solve_standard(sf, max_iter, bland_after)
    if status != OPTIMAL:
        return LpResult(status, iterations=iterations)
    return _lp_result(lp, sf, tableau, rows, iterations)


def branch_and_bound(model: MilpModel, max_nodes: int = 200000, lp_max_iter: int = 5000,
                     bland_after: int = 50, cache_size: int = 64) -> MilpResult:
    """Best-bound branch and bound over the binary variables of ``model``.

    Branches on the most fractional binary (lowest index on ties). A child
    is the parent's optimal tableau plus one fixing row, re-optimized with
    the dual simplex; open nodes keep only their basis. On node budget
    exhaustion the best incumbent is returned with status
    ``iteration_limit``.
    """
    lp = model.lp
    sf = _StandardForm(lp)
    status, root, _, _ = _solve_standard(sf, lp_max_iter, bland_after)
    if status != OPTIMAL:
        return MilpResult(status, node_count=1)

    binaries = [j for j in model.binary_indices if lp.ub[j] > lp.lb[j]]
    column_of = {j: col for col, (j, sgn) in enumerate(sf.cols)}

    tie = itertools.count()
    incumbent = None
    best = -np.inf
    history: list[float] = []
    nodes = 1

    def evaluate(tableau):
        z = tableau.primal()
        x = sf.recover(z[: tableau.n_struct])
        return float(lp.c @ x), x

    def polish(x):
        """Re-solve with the binaries pinned, from scratch, for a clean incumbent."""
        lb, ub = lp.lb.copy(), lp.ub.copy()
        vals = np.round(x[model.binary_indices]) if model.binary_indices else []
        lb[model.binary_indices] = vals
        ub[model.binary_indices] = vals
        res = simplex_solve(lp.with_bounds(lb, ub), max_iter=lp_max_iter)
        return res if res.status == OPTIMAL else None

    root_system = (root.M, root.b, root.c)

    def system(fixes):
        M, b, c = root_system
        for col, val in fixes:
            M, b, c = _append_fixing_row(M, b, c, col, val)
        return M, b, c

    def rebuild(fixes, basis):
        M, b, c = system(fixes)
        try:
            return _Tableau.from_basis(M, b, c, basis, sf.A.shape[1])
        except np.linalg.LinAlgError:
            pass
        # the stored basis drifted to singular: solve the node from scratch
        eq = SimpleNamespace(A=M, b=b, senses=[EQ] * len(b), c=c)
        st, tableau, rows, _ = _solve_standard(eq, lp_max_iter, bland_after)
        if st != OPTIMAL or len(rows[0]) != len(b):
            return None
        tableau.n_struct = sf.A.shape[1]
        return tableau

    # recently created child tableaux, so popping them skips the rebuild
    cache: dict = {(): root}
    root_obj, root_x = evaluate(root)
    heap = [(-root_obj, next(tie), list(root.basis), (), root_x)]
    hit_limit = False
    while heap:
        neg_bound, _, basis, fixes, x = heapq.heappop(heap)
        if -neg_bound <= best + 1e-9:
            continue
        if binaries:
            vals = x[binaries]
            frac = np.abs(vals - np.round(vals))
        else:
            frac = np.zeros(0)
        if frac.size == 0 or frac.max() <= INT_TOL:
            res = polish(x)
            if res is not None and res.objective > best:
                best = res.objective
                incumbent = res.x
                history.append(best)
            continue
        pick = binaries[int(np.argmax(frac))]  # argmax takes the lowest index on ties
        col = column_of[pick]
        parent = cache.pop(fixes, None)
        if parent is None:
            parent = rebuild(fixes, basis)
            if parent is None:
                hit_limit = True
                break
        for fix in (0.0, 1.0):
            if nodes >= max_nodes:
                hit_limit = True
                break
            child = parent.copy() if fix == 0.0 else parent
            child.add_fixing(col, fix)
            counter = [0]
            st = child.reoptimize(lp_max_iter, bland_after, counter)
            nodes += 1
            if st == OPTIMAL:
                obj, cx = evaluate(child)
                if obj > best + 1e-9:
                    key = fixes + ((col, fix),)
                    heapq.heappush(heap, (-obj, next(tie), list(child.basis), key, cx))
                    cache[key] = child
                    if len(cache) > cache_size:
                        cache.pop(next(iter(cache)))
            elif st == ITERATION_LIMIT:
                hit_limit = True
        if hit_limit:
            break
    if hit_limit:
        return MilpResult(ITERATION_LIMIT, incumbent, best, nodes, history)
    if incumbent is None:
        return MilpResult(INFEASIBLE, node_count=nodes)
    return MilpResult(OPTIMAL, incumbent, best, nodes, history)
