"""Dense linear programming kernel (two-phase primal simplex).

Self-contained solver for the desk-scale subproblems generated by the
geometric operations: feasibility checks, support functions, Chebyshev
centers, cone membership tests, and piecewise-linear minimax steps.
Bland's smallest-index rule is used for both the entering and the
leaving variable, which makes the iteration cycle-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LPError", "LPSolution", "solve_lp"]

_COST_TOL = 1e-9
_PIVOT_TOL = 1e-10
_PHASE1_TOL = 1e-8


class LPError(RuntimeError):
    """The simplex iteration failed to terminate within its pivot budget."""


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(tableau, basis, row, col):
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and abs(tableau[i, col]) > 1e-14:
            tableau[i] -= tableau[i, col] * tableau[row]
    basis[row] = col


def _run_phase(tableau, basis, cost, max_iter):
    """Minimize cost over the current tableau; returns 'optimal'/'unbounded'."""
    m = tableau.shape[0]
    n = tableau.shape[1] - 1
    for _ in range(max_iter):
        reduced = cost[:n] - cost[basis] @ tableau[:, :n]
        entering = -1
        for j in range(n):
            if reduced[j] < -_COST_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        col = tableau[:, entering]
        rhs = tableau[:, n]
        leaving = -1
        best = np.inf
        for i in range(m):
            if col[i] > _PIVOT_TOL:
                ratio = rhs[i] / col[i]
                if ratio < best - 1e-12:
                    best = ratio
                    leaving = i
                elif leaving >= 0 and abs(ratio - best) <= 1e-12 and basis[i] < basis[leaving]:
                    leaving = i
        if leaving < 0:
            return "unbounded"
        _pivot(tableau, basis, leaving, entering)
    raise LPError("simplex pivot budget exhausted")


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, bounds=None,
             max_iter=20000):
    """Minimize ``c @ x`` subject to ``a_ub @ x <= b_ub`` and ``a_eq @ x == b_eq``.

    Variables are free unless ``bounds`` gives a per-variable ``(lo, hi)``
    pair; either side may be ``None`` for unbounded.  Returns an
    :class:`LPSolution` whose status is one of ``optimal``, ``infeasible``
    or ``unbounded``.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    if a_ub is None:
        a_ub = np.zeros((0, n))
        b_ub = np.zeros(0)
    else:
        a_ub = np.asarray(a_ub, dtype=float).reshape(-1, n)
        b_ub = np.asarray(b_ub, dtype=float).ravel()
    if a_eq is None:
        a_eq = np.zeros((0, n))
        b_eq = np.zeros(0)
    else:
        a_eq = np.asarray(a_eq, dtype=float).reshape(-1, n)
        b_eq = np.asarray(b_eq, dtype=float).ravel()
    if bounds is None:
        bounds = [(None, None)] * n

    # Substitute every original variable by nonnegative ones:
    #   x_j = shift_j + sum(coef * u_col).
    col_of = []          # per variable: list of (column, coefficient)
    shift = np.zeros(n)
    extra_rows = []      # (coefvec over u in sparse form, rhs) for two-sided bounds
    ncols = 0
    for j, (lo, hi) in enumerate(bounds):
        if lo is None and hi is None:
            col_of.append([(ncols, 1.0), (ncols + 1, -1.0)])
            ncols += 2
        elif lo is not None and hi is None:
            shift[j] = lo
            col_of.append([(ncols, 1.0)])
            ncols += 1
        elif lo is None and hi is not None:
            shift[j] = hi
            col_of.append([(ncols, -1.0)])
            ncols += 1
        else:
            if hi < lo - 1e-12:
                return LPSolution("infeasible", None, None)
            shift[j] = lo
            col_of.append([(ncols, 1.0)])
            extra_rows.append((ncols, hi - lo))
            ncols += 1

    def expand(mat):
        out = np.zeros((mat.shape[0], ncols))
        for j in range(n):
            for col, coef in col_of[j]:
                out[:, col] += coef * mat[:, j]
        return out

    ub_mat = expand(a_ub)
    ub_rhs = b_ub - a_ub @ shift
    eq_mat = expand(a_eq)
    eq_rhs = b_eq - a_eq @ shift
    for col, ub_val in extra_rows:
        row = np.zeros(ncols)
        row[col] = 1.0
        ub_mat = np.vstack([ub_mat, row])
        ub_rhs = np.append(ub_rhs, ub_val)

    n_ub = ub_mat.shape[0]
    n_eq = eq_mat.shape[0]
    m = n_ub + n_eq
    if m == 0:
        # No constraints: only bounded if the cost over u is nonnegative.
        cu = expand(c.reshape(1, -1)).ravel()
        if np.any(cu < -_COST_TOL):
            return LPSolution("unbounded", None, None)
        return LPSolution("optimal", shift.copy(), float(c @ shift))

    # Columns: u variables, then slacks for the ub rows, then artificials.
    slack = np.vstack([np.eye(n_ub), np.zeros((n_eq, n_ub))]) if n_ub else np.zeros((m, 0))
    body = np.hstack([np.vstack([ub_mat, eq_mat]), slack])
    rhs = np.concatenate([ub_rhs, eq_rhs])
    neg = rhs < 0
    body[neg] *= -1.0
    rhs = np.abs(rhs)

    n_struct = body.shape[1]
    basis = np.full(m, -1, dtype=int)
    # Slack columns that survived the sign flip give a free starting basis.
    for i in range(n_ub):
        if not neg[i]:
            basis[i] = ncols + i
    need_art = [i for i in range(m) if basis[i] < 0]
    n_art = len(need_art)
    art = np.zeros((m, n_art))
    for k, i in enumerate(need_art):
        art[i, k] = 1.0
        basis[i] = n_struct + k
    tableau = np.hstack([body, art, rhs.reshape(-1, 1)])
    total = n_struct + n_art

    budget = max(max_iter, 50 * (m + total))
    if n_art:
        cost1 = np.zeros(total)
        cost1[n_struct:] = 1.0
        status = _run_phase(tableau, basis, cost1, budget)
        if status != "optimal":
            raise LPError("phase-1 simplex did not reach optimality")
        if cost1[basis] @ tableau[:, total] > _PHASE1_TOL:
            return LPSolution("infeasible", None, None)
        # Drive remaining artificial variables out of the basis.
        keep_rows = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n_struct:
                piv = -1
                for j in range(n_struct):
                    if abs(tableau[i, j]) > 1e-9:
                        piv = j
                        break
                if piv >= 0:
                    _pivot(tableau, basis, i, piv)
                else:
                    keep_rows[i] = False  # redundant row
        if not keep_rows.all():
            tableau = tableau[keep_rows]
            basis = basis[keep_rows]
            m = tableau.shape[0]
        tableau = np.hstack([tableau[:, :n_struct], tableau[:, total:]])

    cost2 = np.zeros(n_struct)
    cu = expand(c.reshape(1, -1)).ravel()
    cost2[:ncols] = cu
    status = _run_phase(tableau, basis, cost2, budget)
    if status == "unbounded":
        return LPSolution("unbounded", None, None)

    u = np.zeros(n_struct)
    for i in range(m):
        if basis[i] < n_struct:
            u[basis[i]] = tableau[i, -1]
    x = shift.copy()
    for j in range(n):
        for col, coef in col_of[j]:
            x[j] += coef * u[col]
    return LPSolution("optimal", x, float(c @ x))
