"""Dense two-phase tableau simplex with Bland's rule.

Intended for the tiny power-control programs (a handful of variables, at most
a few hundred rows); no attempt is made at sparsity or speed.

    min c^T x   s.t.  G x <sense> b,  x >= 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _run(T, basis, n_cols, max_iter):
    """Bland-rule iterations on tableau ``T`` whose last row is the cost row.

    Only the first ``n_cols`` columns may enter.  Returns (status, iterations).
    """
    m = T.shape[0] - 1
    basis_arr = np.asarray(basis)
    for it in range(max_iter):
        cost = T[-1, :n_cols]
        scale = max(1.0, float(np.abs(cost).max()))
        neg = cost < -PIVOT_TOL * scale
        if not neg.any():
            return "optimal", it
        col = int(neg.argmax())
        column = T[:m, col]
        ok = column > PIVOT_TOL
        if not ok.any():
            return "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, -1][ok] / column[ok]
        best = ratios.min()
        ties = ratios <= best + PIVOT_TOL * max(1.0, abs(best))
        row = int(np.flatnonzero(ties)[np.argmin(basis_arr[ties])])
        _pivot(T, row, col)
        basis[row] = col
        basis_arr[row] = col
    return "max_iterations", max_iter


def solve_lp(c, G, senses, b, max_iter: int = 10_000) -> LpResult:
    """Solve the program; ``senses`` holds '>=', '<=' or '==' per row of G."""
    c = np.asarray(c, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = G.shape
    if m == 0:
        if np.any(c < 0):
            return LpResult("unbounded", None, -np.inf, 0)
        return LpResult("optimal", np.zeros(n), 0.0, 0)

    # b enters the row scale so a near-zero row cannot inflate rhs (and the
    # phase-one tolerance with it); columns are then equilibrated, y = colscale * x
    r = np.maximum(np.max(np.abs(G), axis=1), np.abs(b))
    r = np.where(r > 0, r, 1.0)
    A, rhs = G / r[:, None], b / r
    colscale = np.max(np.abs(A), axis=0)
    colscale = np.where(colscale > 0, colscale, 1.0)
    A = A / colscale
    cost = c / colscale
    sense = list(senses)
    for r in range(m):
        if rhs[r] < 0:
            A[r], rhs[r] = -A[r], -rhs[r]
            sense[r] = {">=": "<=", "<=": ">="}.get(sense[r], "==")

    n_slack = sum(s != "==" for s in sense)
    need_art = [r for r in range(m) if sense[r] != "<="]
    n_art = len(need_art)
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, -1] = rhs
    basis = [-1] * m
    k = n
    for r in range(m):
        if sense[r] == "<=":
            T[r, k] = 1.0
            basis[r] = k
            k += 1
        elif sense[r] == ">=":
            T[r, k] = -1.0
            k += 1
    for j, r in enumerate(need_art):
        T[r, n + n_slack + j] = 1.0
        basis[r] = n + n_slack + j

    iterations = 0
    if n_art:
        T[-1, n + n_slack:width] = 1.0
        for r in need_art:
            T[-1] -= T[r]
        status, it = _run(T, basis, width, max_iter)
        iterations += it
        if status == "unbounded":
            # phase one is bounded below by zero; this is round-off in the cost row
            status = "optimal"
        if status != "optimal":
            return LpResult(status, None, np.nan, iterations)
        if -T[-1, -1] > 1e-9 and not _phase_one_feasible(T, basis, A, sense, rhs, n + n_slack):
            return LpResult("infeasible", None, np.nan, iterations)
        # Drive remaining artificials out of the basis; drop redundant rows.
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n + n_slack:
                cand = np.flatnonzero(np.abs(T[r, :n + n_slack]) > PIVOT_TOL)
                if cand.size:
                    _pivot(T, r, int(cand[0]))
                    basis[r] = int(cand[0])
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        T = np.vstack([T[rows], T[-1:]])
        basis = [basis[r] for r in rows]
        T = np.delete(T, np.s_[n + n_slack:width], axis=1)
        width = n + n_slack

    T[-1] = 0.0
    T[-1, :n] = cost
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status, it = _run(T, basis, width, max_iter)
    iterations += it
    if status != "optimal":
        return LpResult(status, None, np.nan if status != "unbounded" else -np.inf, iterations)

    x = np.zeros(width)
    x[basis] = T[:-1, -1]
    x = _refine(A, sense, rhs, basis, x, n, width)
    xs = np.maximum(x[:n], 0.0) / colscale
    return LpResult("optimal", xs, float(c @ xs), iterations)


def _with_slacks(A, sense):
    m, n = A.shape
    full = np.zeros((m, n + sum(s != "==" for s in sense)))
    full[:, :n] = A
    k = n
    for r in range(m):
        if sense[r] != "==":
            full[r, k] = 1.0 if sense[r] == "<=" else -1.0
            k += 1
    return full


def _phase_one_feasible(T, basis, A, sense, rhs, width, tol=1e-9):
    """Backward-error test of the phase-one point with artificials dropped.

    A leftover phase-one objective can be pure round-off when the basic
    solution is large; the point is accepted when every row residual is
    within ``tol`` of |A| |x| + |rhs|.
    """
    x = np.zeros(width)
    for r, j in enumerate(basis):
        if j < width:
            x[j] = max(T[r, -1], 0.0)
    full = _with_slacks(A, sense)
    resid = np.abs(full @ x - rhs)
    return bool(np.all(resid <= tol * (np.abs(full) @ x + np.abs(rhs))))


def _refine(A, sense, rhs, basis, x, n, width):
    """Recompute the basic solution from the original rows to remove pivot drift."""
    B = _with_slacks(A, sense)[:, basis]
    if B.shape[0] != B.shape[1]:
        sol, *_ = np.linalg.lstsq(B, rhs, rcond=None)
    else:
        try:
            sol = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError:
            return x
    out = np.zeros(width)
    out[basis] = sol
    return out
