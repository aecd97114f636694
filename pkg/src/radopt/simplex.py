"""Dense tableau simplex with Bland's rule.

Solves ``max c^T y  s.t.  A y <= b, y >= 0`` with ``b >= 0``, so the slack
basis is feasible from the start and no phase I is needed. Covering LPs
(``min c^T x, A x >= 1``) are solved through this form as their duals; the
primal ``x`` is read off the final reduced costs of the slack columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

EPS = 1e-9


@dataclass
class SimplexResult:
    y: np.ndarray          # primal solution of the max problem
    duals: np.ndarray      # multipliers of the <= rows
    objective: float
    iterations: int
    status: str            # "optimal" | "unbounded"


def simplex_max(c, A, b, max_iter: int | None = None) -> SimplexResult:
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    if np.any(b < -EPS):
        raise ValueError("slack basis needs b >= 0")
    if max_iter is None:
        max_iter = 50 * (m + n)

    # tableau: m constraint rows + objective row; columns: n vars, m slacks, rhs
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))

    it = 0
    while True:
        obj = T[m, :-1]
        entering = np.flatnonzero(obj < -EPS)
        if entering.size == 0:
            status = "optimal"
            break
        if it >= max_iter:
            raise NumericError(
                f"simplex hit the iteration cap ({max_iter}) on a {m}x{n} problem; "
                f"objective so far {T[m, -1]:.9g}, most negative reduced cost {obj.min():.3g}")
        e = int(entering[0])  # Bland: lowest-index improving column
        col = T[:m, e]
        pos = col > EPS
        if not np.any(pos):
            status = "unbounded"
            break
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + EPS * max(1.0, abs(rmin)))
        r = int(min(ties, key=lambda i: basis[i]))  # Bland: lowest basic index leaves
        T[r] /= T[r, e]
        others = np.abs(T[:, e]) > 0
        others[r] = False
        T[others] -= np.outer(T[others, e], T[r])
        basis[r] = e
        it += 1

    y = np.zeros(n + m)
    for i, j in enumerate(basis):
        y[j] = T[i, -1]
    return SimplexResult(y[:n], T[m, n:n + m].copy(), float(T[m, -1]), it, status)


def solve_covering_lp(costs, A, upper_bounds: bool = True):
    """``min costs^T x  s.t.  A x >= 1, 0 <= x (<= 1)``.

    Returns ``(x, objective)``; ``x`` is ``None`` when the covering problem
    is infeasible (its dual is unbounded).
    """
    costs = np.asarray(costs, float)
    A = np.asarray(A, float)
    n_rows, n_cols = A.shape
    if n_rows == 0:
        return np.zeros(n_cols), 0.0
    # dual: max 1^T y - 1^T z  s.t.  A^T y - z <= costs,  y, z >= 0
    if upper_bounds:
        dual_A = np.hstack([A.T, -np.eye(n_cols)])
        dual_c = np.concatenate([np.ones(n_rows), -np.ones(n_cols)])
    else:
        dual_A, dual_c = A.T, np.ones(n_rows)
    res = simplex_max(dual_c, dual_A, costs)
    if res.status == "unbounded":
        return None, float("inf")
    x = np.clip(res.duals, 0.0, None)
    return x, res.objective
