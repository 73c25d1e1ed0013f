"""Small dense linear-program solver.

Two-phase primal simplex on a dense tableau with Bland's entering rule.
The polytopes in this package have at most a few dozen variables and rows,
so a simple exact-ish tableau method is faster to trust than to tune:
no scaling, no revised factorizations, just careful pivoting.

Problems are stated as  min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,
x >= 0.  Status is one of "optimal", "infeasible", "unbounded".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9


class SimplexError(RuntimeError):
    pass


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None = None
    value: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    piv = T[row]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * piv
    basis[row] = col


def _bland_min(T: np.ndarray, basis: list[int], n_cols: int, tol: float,
               max_iter: int) -> str:
    """Run simplex to optimality on a tableau whose last row is the
    (priced-out) objective and last column the RHS."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        enter = -1
        for jv in range(n_cols):
            if T[-1, jv] < -tol:
                enter = jv
                break
        if enter < 0:
            return "optimal"
        leave_row = -1
        best_ratio = np.inf
        best_basis = -1
        for r in range(m):
            a = T[r, enter]
            if a > tol:
                ratio = T[r, -1] / a
                if (ratio < best_ratio - 1e-12
                        or (abs(ratio - best_ratio) <= 1e-12
                            and (leave_row < 0 or basis[r] < best_basis))):
                    best_ratio = ratio
                    best_basis = basis[r]
                    leave_row = r
        if leave_row < 0:
            return "unbounded"
        _pivot(T, basis, leave_row, enter)
    raise SimplexError("simplex failed to converge")


def _price_out(T: np.ndarray, basis: list[int], cost: np.ndarray) -> None:
    T[-1, :] = 0.0
    T[-1, : cost.size] = cost
    for r, bv in enumerate(basis):
        cb = T[-1, bv]
        if cb != 0.0:
            T[-1] -= cb * T[r]


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
             tol: float = FEAS_TOL, maximize: bool = False) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    if maximize:
        c = -c

    rows = []
    rhs = []
    kinds = []
    if A_ub is not None:
        A_ub = np.asarray(A_ub, dtype=float).reshape(-1, n)
        b_ub = np.asarray(b_ub, dtype=float).ravel()
        for r in range(A_ub.shape[0]):
            rows.append(A_ub[r])
            rhs.append(b_ub[r])
            kinds.append("ub")
    if A_eq is not None:
        A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
        b_eq = np.asarray(b_eq, dtype=float).ravel()
        for r in range(A_eq.shape[0]):
            rows.append(A_eq[r])
            rhs.append(b_eq[r])
            kinds.append("eq")
    m = len(rows)
    if m == 0:
        # unconstrained over the non-negative orthant
        if (c < -tol).any():
            return LPResult("unbounded")
        x = np.zeros(n)
        return LPResult("optimal", x, 0.0)

    n_slack = sum(1 for k in kinds if k == "ub")
    # build [A | slack | artificial | rhs]; artificials added as needed
    art_cols: list[int] = []
    width = n + n_slack
    body = np.zeros((m, width))
    b = np.zeros(m)
    basis: list[int] = []
    si = 0
    need_art = []
    for r in range(m):
        row = rows[r].copy()
        bb = rhs[r]
        scol = -1
        if kinds[r] == "ub":
            scol = n + si
            si += 1
        if bb < 0:
            row = -row
            bb = -bb
            sv = -1.0
        else:
            sv = 1.0
        body[r, :n] = row
        b[r] = bb
        if scol >= 0:
            body[r, scol] = sv
            if sv > 0:
                basis.append(scol)
                need_art.append(False)
                continue
        basis.append(-1)        # placeholder, artificial goes here
        need_art.append(True)

    n_art = sum(need_art)
    total = width + n_art
    T = np.zeros((m + 1, total + 1))
    T[:m, :width] = body
    T[:m, -1] = b
    ai = 0
    for r in range(m):
        if need_art[r]:
            col = width + ai
            T[r, col] = 1.0
            basis[r] = col
            art_cols.append(col)
            ai += 1

    max_iter = 200 * (m + total + 10)

    if n_art:
        phase1_cost = np.zeros(total)
        phase1_cost[width:] = 1.0
        _price_out(T, basis, phase1_cost)
        status = _bland_min(T, basis, total, tol, max_iter)
        if status != "optimal":
            raise SimplexError("phase 1 failed")    # cannot be unbounded
        if -T[-1, -1] > tol:      # priced-out objective stores -value
            return LPResult("infeasible")
        # drive any degenerate artificial out of the basis
        drop_rows = []
        for r in range(m):
            if basis[r] >= width:
                piv = -1
                for jv in range(width):
                    if abs(T[r, jv]) > tol:
                        piv = jv
                        break
                if piv >= 0:
                    _pivot(T, basis, r, piv)
                else:
                    drop_rows.append(r)       # redundant constraint
        if drop_rows:
            keep = [r for r in range(m) if r not in drop_rows]
            T = np.vstack([T[keep], T[-1:]])
            basis = [basis[r] for r in keep]
            m = len(keep)
        # forbid artificials from re-entering
        T[:, width:total] = 0.0

    phase2_cost = np.zeros(total)
    phase2_cost[:n] = c
    _price_out(T, basis, phase2_cost)
    status = _bland_min(T, basis, width, tol, max_iter)
    if status == "unbounded":
        return LPResult("unbounded")
    x = np.zeros(total)
    for r, bv in enumerate(basis):
        x[bv] = T[r, -1]
    value = float(phase2_cost @ x)
    if maximize:
        value = -value
    return LPResult("optimal", x[:n].copy(), value)
