"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Meant for the tiny programs used as oracles (tens of variables).  Bland's
rule makes the pivot sequence, and therefore the returned vertex, a pure
function of the input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalError

PIVOT_TOL = 1e-11


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    status: str  # "optimal" | "infeasible" | "unbounded"
    iterations: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run(T, basis, n_cols, max_iter):
    """Minimize the objective stored in the last row of T (reduced costs)."""
    it = 0
    while True:
        obj = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if obj[j] < -PIVOT_TOL), None)
        if entering is None:
            return "optimal", it
        col = T[:-1, entering]
        rhs = T[:-1, -1]
        best, leave = np.inf, None
        for i in range(col.size):
            if col[i] > PIVOT_TOL:
                ratio = rhs[i] / col[i]
                # Bland: smallest ratio, then smallest basis index
                if ratio < best - 1e-14 or (abs(ratio - best) <= 1e-14 and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return "unbounded", it
        _pivot(T, leave, entering)
        basis[leave] = entering
        it += 1
        if it > max_iter:
            raise InternalError("simplex iteration limit reached")


def _standard_form(c, A_ub, b_ub, A_eq, b_eq, bounds):
    """Rewrite into min c'z, A z = b, z >= 0; return the map back to x."""
    n = c.size
    cols = []  # (original index, sign)
    offset = np.zeros(n)
    ub_rows, ub_rhs = [], []
    for j, (lo, hi) in enumerate(bounds):
        lo = -np.inf if lo is None else float(lo)
        hi = np.inf if hi is None else float(hi)
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                ub_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    k = len(cols)
    M = np.zeros((n, k))
    for idx, (j, s) in enumerate(cols):
        M[j, idx] = s
    rows, rhs, slack = [], [], []
    if A_ub is not None:
        for a, b in zip(A_ub, b_ub):
            rows.append(a @ M)
            rhs.append(b - a @ offset)
            slack.append(True)
    for idx, bound in ub_rows:
        e = np.zeros(k)
        e[idx] = 1.0
        rows.append(e)
        rhs.append(bound)
        slack.append(True)
    if A_eq is not None:
        for a, b in zip(A_eq, b_eq):
            rows.append(a @ M)
            rhs.append(b - a @ offset)
            slack.append(False)
    n_slack = sum(slack)
    A = np.zeros((len(rows), k + n_slack))
    s = 0
    for i, (row, is_ub) in enumerate(zip(rows, slack)):
        A[i, :k] = row
        if is_ub:
            A[i, k + s] = 1.0
            s += 1
    cz = np.concatenate([c @ M, np.zeros(n_slack)])
    return cz, A, np.array(rhs, dtype=float), M, offset, k


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, max_iter=10_000) -> LPResult:
    """Minimize c'x subject to A_ub x <= b_ub, A_eq x = b_eq, bounds (default x >= 0)."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = None if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    A_eq = None if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_ub = None if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = None if b_eq is None else np.asarray(b_eq, dtype=float)
    if bounds is None:
        bounds = [(0.0, None)] * n
    elif isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
        bounds = [bounds] * n
    cz, A, b, M, offset, k = _standard_form(c, A_ub, b_ub, A_eq, b_eq, bounds)
    m, nz = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1: one artificial per row
    T = np.zeros((m + 1, nz + m + 1))
    T[:m, :nz] = A
    T[:m, nz:nz + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :nz] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(nz, nz + m))
    status, it1 = _run(T, basis, nz + m, max_iter)
    if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        return LPResult(np.full(n, np.nan), np.nan, "infeasible", it1)
    # drive remaining artificials out of the basis
    for i in range(m):
        if basis[i] >= nz:
            j = next((j for j in range(nz) if abs(T[i, j]) > PIVOT_TOL), None)
            if j is not None:
                _pivot(T, i, j)
                basis[i] = j
    keep = [i for i in range(m) if basis[i] < nz]
    T2 = np.zeros((len(keep) + 1, nz + 1))
    T2[:-1, :nz] = T[keep, :nz]
    T2[:-1, -1] = T[keep, -1]
    basis2 = [basis[i] for i in keep]
    T2[-1, :nz] = cz
    for i, bj in enumerate(basis2):
        T2[-1] -= cz[bj] * T2[i]
    status, it2 = _run(T2, basis2, nz, max_iter)
    if status != "optimal":
        return LPResult(np.full(n, np.nan), np.nan, status, it1 + it2)
    z = np.zeros(nz)
    for i, bj in enumerate(basis2):
        z[bj] = T2[i, -1]
    x = M @ z[:k] + offset
    return LPResult(x, float(c @ x), "optimal", it1 + it2)
