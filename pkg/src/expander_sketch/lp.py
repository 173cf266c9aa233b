"""Dense tableau simplex for the small linear programs used in this package.

Solves::

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

Pivoting uses Dantzig's rule and falls back to Bland's rule after a run of
degenerate pivots, which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    ray: np.ndarray | None = None

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    """Tableau with the reduced-cost row stored last and the rhs column last."""

    def __init__(self, T: np.ndarray, basis: list[int], tol: float, bland_after: int):
        # column-major so the rank-one pivot update runs in place through BLAS
        self.T = np.asfortranarray(T)
        self.basis = basis
        self.tol = tol
        self.bland_after = bland_after
        self.iterations = 0

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        out = dger(-1.0, factors, T[row].copy(), a=T, overwrite_a=1)
        if out is not T:
            T[...] = out
        self.basis[row] = col
        self.iterations += 1

    def run(self, max_iter: int, allowed: np.ndarray | None = None) -> tuple[str, int | None]:
        """Pivot to optimality. Returns (status, unbounded column)."""
        T, tol = self.T, self.tol
        degenerate_run = 0
        while True:
            if self.iterations >= max_iter:
                return ITERATION_LIMIT, None
            reduced = T[-1, :-1]
            if allowed is not None:
                reduced = np.where(allowed, reduced, 0.0)
            use_bland = degenerate_run >= self.bland_after
            if use_bland:
                candidates = np.flatnonzero(reduced > tol)
                if candidates.size == 0:
                    return OPTIMAL, None
                col = int(candidates[0])
            else:
                col = int(np.argmax(reduced))
                if reduced[col] <= tol:
                    return OPTIMAL, None

            column = T[:-1, col]
            positive = column > tol
            if not positive.any():
                return UNBOUNDED, col
            rows = np.flatnonzero(positive)
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            if use_bland:
                row = int(min(ties, key=lambda r: self.basis[r]))
            else:
                row = int(ties[np.argmax(column[ties])])
            degenerate_run = degenerate_run + 1 if T[row, -1] <= tol else 0
            self.pivot(row, col)

    def solution(self, ncols: int) -> np.ndarray:
        x = np.zeros(ncols)
        for r, b in enumerate(self.basis):
            if b < ncols:
                x[b] = self.T[r, -1]
        return np.maximum(x, 0.0)

    def ray(self, col: int, ncols: int) -> np.ndarray:
        d = np.zeros(ncols)
        d[col] = 1.0
        for r, b in enumerate(self.basis):
            if b < ncols:
                d[b] = -self.T[r, col]
        return d


def simplex(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    *,
    basis: list[int] | None = None,
    tol: float = 1e-9,
    max_iter: int | None = None,
    bland_after: int | None = None,
) -> LPResult:
    """Maximize ``c @ x`` over ``x >= 0`` with inequality and equality rows.

    Parameters
    ----------
    basis : list of int, optional
        Starting basis, one column per row (inequality rows first). Column
        indices refer to the standard form ``[x | slacks]`` where slacks are
        numbered in inequality-row order. The basis must be primal feasible;
        when omitted a two-phase start with artificial variables is used.
    max_iter : int, optional
        Pivot cap, defaults to ``50 * (number of standard-form columns)``.
    bland_after : int, optional
        Consecutive degenerate pivots tolerated before switching to Bland's
        rule; defaults to ``max(50, 2 * rows)``. Degenerate runs of about one
        row count are routine here and Bland's rule is far slower.

    Returns
    -------
    LPResult
        ``x`` holds the original variables only. For an unbounded problem
        ``ray`` is a feasible direction of increase.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise ValueError("constraint shapes do not match the objective")

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    ncols = n + m_ub
    if max_iter is None:
        max_iter = 50 * (ncols + m)
    if bland_after is None:
        bland_after = max(50, 2 * m)

    A = np.zeros((m, ncols))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])

    if basis is not None:
        return _solve_from_basis(c, A, b, list(basis), n, ncols, tol, max_iter, bland_after)

    # Phase 1: flip rows to b >= 0, reuse slacks where they stay +1.
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    art_rows = [i for i in range(m) if not (i < m_ub and sign[i] > 0)]
    n_art = len(art_rows)
    width = ncols + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :ncols] = A
    T[:m, -1] = b
    start = [n + i if i < m_ub else -1 for i in range(m)]
    for j, i in enumerate(art_rows):
        T[i, ncols + j] = 1.0
        start[i] = ncols + j
    tab = _Tableau(T, start, tol, bland_after)
    T = tab.T

    if n_art:
        T[-1, ncols:width] = -1.0
        for i in art_rows:
            T[-1] += T[i]
        status, _ = tab.run(max_iter)
        if status == ITERATION_LIMIT:
            return LPResult(status, None, np.nan, tab.iterations)
        if -T[-1, -1] < -tol * max(1.0, np.abs(b).max(initial=0.0)) * 10:
            return LPResult(INFEASIBLE, None, np.nan, tab.iterations)
        # Drive zero-level artificials out of the basis, dropping redundant rows.
        keep = []
        for r in range(m):
            if tab.basis[r] >= ncols:
                row = T[r, :ncols]
                j = int(np.argmax(np.abs(row)))
                if abs(row[j]) > tol:
                    tab.pivot(r, j)
                    keep.append(r)
            else:
                keep.append(r)
        T = np.vstack([T[keep][:, list(range(ncols)) + [width]], np.zeros((1, ncols + 1))])
        tab = _Tableau(T, [tab.basis[r] for r in keep], tol, bland_after)
        tab.iterations = 0
    return _phase_two(tab, c, n, ncols, max_iter)


def _solve_from_basis(c, A, b, basis, n, ncols, tol, max_iter, bland_after) -> LPResult:
    m = b.size
    if len(basis) != m:
        raise ValueError("starting basis needs one column per row")
    B = A[:, basis]
    T = np.zeros((m + 1, ncols + 1))
    T[:m] = np.linalg.solve(B, np.column_stack([A, b]))
    if T[:m, -1].min(initial=0.0) < -tol:
        raise LPError("starting basis is not primal feasible")
    T[:m, -1] = np.maximum(T[:m, -1], 0.0)
    tab = _Tableau(T, basis, tol, bland_after)
    return _phase_two(tab, c, n, ncols, max_iter)


def _phase_two(tab: _Tableau, c, n, ncols, max_iter) -> LPResult:
    T = tab.T
    cost = np.zeros(ncols)
    cost[:n] = c
    T[-1, :] = 0.0
    T[-1, :ncols] = cost
    for r, j in enumerate(tab.basis):
        if cost[j] != 0.0:
            T[-1] -= cost[j] * T[r]
    status, col = tab.run(max_iter + tab.iterations)
    if status == UNBOUNDED:
        ray = tab.ray(col, ncols)[:n]
        return LPResult(UNBOUNDED, tab.solution(ncols)[:n], np.inf, tab.iterations, ray)
    if status == ITERATION_LIMIT:
        return LPResult(status, None, np.nan, tab.iterations)
    x = tab.solution(ncols)[:n]
    return LPResult(OPTIMAL, x, float(c @ x), tab.iterations)
