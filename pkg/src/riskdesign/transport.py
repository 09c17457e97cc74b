"""Order-1 Wasserstein distance between distributions on an ordered type list.

Types sit at unit spacing, so the ground metric is |i - j|.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import as_row, check_simplex
from .errors import DomainError, InternalError
from .lp import linprog


@dataclass(frozen=True)
class DualPotential:
    b: np.ndarray
    value: float


def _pair(mu, mu0):
    a = check_simplex(mu, "mu", tol=1e-9)
    b = check_simplex(mu0, "mu0", tol=1e-9)
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.size} vs {b.size}")
    return a, b


def w1(mu, mu0) -> float:
    """W1 via the cumulative-sum formula for unit-spaced atoms."""
    a, b = _pair(mu, mu0)
    return float(np.abs(np.cumsum(a - b)[:-1]).sum())


def w1_dual(mu, mu0) -> DualPotential:
    """Solve the Kantorovich-Rubinstein dual; potentials normalized to b_n = 0."""
    a, b = _pair(mu, mu0)
    n = a.size
    rows = []
    rhs = []
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros(n)
            e[i], e[j] = 1.0, -1.0
            rows += [e, -e]
            rhs += [j - i, j - i]
    bounds = [(None, None)] * (n - 1) + [(0.0, 0.0)]
    res = linprog(-(a - b), A_ub=np.array(rows) if rows else None, b_ub=rhs or None, bounds=bounds)
    if res.status != "optimal":
        raise InternalError(f"Kantorovich dual LP returned {res.status}")
    # vertices of B with b_n = 0 are integral
    pot = np.round(res.x)
    if np.abs(pot - res.x).max() > 1e-7:
        raise InternalError("dual LP vertex is not integral")
    pot = pot + 0.0
    return DualPotential(pot, float(np.dot(pot, a - b)))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    y = as_row(v, "v")
    n = y.size
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, n + 1)
    r = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[r] / (r + 1.0)
    x = np.maximum(y - tau, 0.0)
    # keep feasible inputs bit-identical so the map is idempotent
    if np.all(y >= 0) and abs(y.sum() - 1.0) <= 1e-15:
        return y.copy()
    return x / x.sum()
