"""Shared data model: loss grids, action-indexed outcome laws, types, contracts, scenarios.

Everything here is immutable after construction.  Integrals over the loss
space are probability-weighted sums over a finite ordered grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np

from .errors import DomainError, UnsupportedError

if TYPE_CHECKING:
    from .risk_measures import RiskMeasureSpec

SIMPLEX_TOL = 1e-12


def as_row(values, name="values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_simplex(probs, name="probs", tol=SIMPLEX_TOL) -> np.ndarray:
    """Validate a probability row and return it as an array."""
    arr = as_row(probs, name)
    if arr.size == 0:
        raise DomainError(f"{name} is empty")
    if np.any(arr < -tol):
        raise DomainError(f"{name} has negative entries: {arr}")
    if abs(arr.sum() - 1.0) > tol:
        raise DomainError(f"{name} does not sum to 1 (sum={float(arr.sum()):.12g})")
    return arr


def expectation(values, probs) -> float:
    """Sum of values weighted by probs."""
    v = as_row(values, "values")
    p = as_row(probs, "probs")
    if v.shape != p.shape:
        raise DomainError(f"length mismatch: {v.size} values vs {p.size} probabilities")
    return float(np.dot(v, p))


@dataclass(frozen=True)
class OutcomeGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = as_row(self.points, "grid")
        if pts.size < 2:
            raise DomainError("grid needs at least 2 points")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class TabularFamily:
    """Probability rows attached to isolated actions."""

    actions: tuple
    rows: np.ndarray

    def __post_init__(self):
        acts = tuple(float(a) for a in self.actions)
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if len(acts) == 0 or rows.shape[0] != len(acts):
            raise DomainError("tabular family needs one row per action")
        if len(set(acts)) != len(acts):
            raise DomainError("duplicate actions in tabular family")
        for r in rows:
            check_simplex(r, "family row")
        rows.setflags(write=False)
        object.__setattr__(self, "actions", acts)
        object.__setattr__(self, "rows", rows)

    @property
    def kind(self):
        return "tabular"


@dataclass(frozen=True)
class LinearFamily:
    """p(x) = (1 - x) p_low + x p_high on [0, 1]."""

    p_low: np.ndarray
    p_high: np.ndarray

    def __post_init__(self):
        lo = check_simplex(self.p_low, "p_L")
        hi = check_simplex(self.p_high, "p_H")
        if lo.shape != hi.shape:
            raise DomainError("p_L and p_H differ in length")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "p_low", lo)
        object.__setattr__(self, "p_high", hi)

    @property
    def kind(self):
        return "linear"


Family = Union[TabularFamily, LinearFamily]


@dataclass(frozen=True)
class OutcomeModel:
    """Loss grid plus an action-parameterized law.

    ``reference_probs`` is the reference measure P(xi); the density p(xi, x)
    against it is ``density(model, x) / reference_probs``.  Defaults to uniform.
    """

    grid: OutcomeGrid
    family: Family
    reference_probs: np.ndarray = None

    def __post_init__(self):
        m = len(self.grid)
        width = self.family.rows.shape[1] if isinstance(self.family, TabularFamily) else self.family.p_low.size
        if width != m:
            raise DomainError(f"family rows have {width} entries, grid has {m}")
        ref = np.full(m, 1.0 / m) if self.reference_probs is None else check_simplex(self.reference_probs, "reference_probs")
        if ref.size != m:
            raise DomainError("reference_probs length differs from grid")
        ref.setflags(write=False)
        object.__setattr__(self, "reference_probs", ref)

    @property
    def losses(self) -> np.ndarray:
        return self.grid.points

    @property
    def smooth(self) -> bool:
        return isinstance(self.family, LinearFamily)


def density(model: OutcomeModel, x: float) -> np.ndarray:
    """Outcome probabilities under action ``x``."""
    fam = model.family
    x = float(x)
    if isinstance(fam, LinearFamily):
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"action {x} outside [0, 1]")
        if x == 0.0:
            return fam.p_low.copy()
        if x == 1.0:
            return fam.p_high.copy()
        return (1.0 - x) * fam.p_low + x * fam.p_high
    for a, row in zip(fam.actions, fam.rows):
        if a == x:
            return row.copy()
    raise DomainError(f"action {x} not among declared actions {fam.actions}")


def density_dx(model: OutcomeModel, x: float) -> np.ndarray:
    """Derivative of the outcome probabilities in the action."""
    fam = model.family
    if not isinstance(fam, LinearFamily):
        raise UnsupportedError("derivative in x is undefined for isolated discrete actions")
    if not 0.0 <= float(x) <= 1.0:
        raise DomainError(f"action {x} outside [0, 1]")
    return fam.p_high - fam.p_low


def likelihood(model: OutcomeModel, x: float) -> np.ndarray:
    """Density p(xi, x) with respect to the reference measure."""
    return density(model, x) / model.reference_probs


@dataclass(frozen=True)
class ActionSet:
    """Either a finite list of actions or a closed interval."""

    values: tuple = None
    interval: tuple = None

    def __post_init__(self):
        if (self.values is None) == (self.interval is None):
            raise DomainError("action set needs exactly one of values / interval")
        if self.values is not None:
            vals = tuple(sorted(float(v) for v in self.values))
            if not vals:
                raise DomainError("empty action set")
            object.__setattr__(self, "values", vals)
        else:
            lo, hi = (float(v) for v in self.interval)
            if not lo <= hi:
                raise DomainError(f"empty action interval [{lo}, {hi}]")
            object.__setattr__(self, "interval", (lo, hi))

    @property
    def discrete(self) -> bool:
        return self.values is not None

    @property
    def bounds(self) -> tuple:
        if self.discrete:
            return self.values[0], self.values[-1]
        return self.interval

    def contains(self, x: float) -> bool:
        if self.discrete:
            return float(x) in self.values
        lo, hi = self.interval
        return lo <= x <= hi

    def grid(self, n: int = 1001) -> np.ndarray:
        if self.discrete:
            return np.array(self.values)
        lo, hi = self.interval
        return np.linspace(lo, hi, n) if hi > lo else np.array([lo])


@dataclass(frozen=True)
class TypeSpace:
    types: tuple

    def __post_init__(self):
        ts = tuple(self.types)
        if not ts:
            raise DomainError("type space needs at least one type")
        object.__setattr__(self, "types", ts)

    def __len__(self):
        return len(self.types)

    def __iter__(self):
        return iter(self.types)


@dataclass(frozen=True)
class TypeDistribution:
    weights: np.ndarray

    def __post_init__(self):
        w = check_simplex(self.weights, "type distribution")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


def type_weights(mu, n: int) -> np.ndarray:
    """Raw weight vector of length n.

    Off-simplex vectors are accepted on purpose: sensitivity probes perturb one
    coordinate at a time.
    """
    w = as_row(np.asarray(mu, dtype=float), "mu")
    if w.size != n:
        raise DomainError(f"mu has {w.size} weights, type space has {n} types")
    return w


@dataclass(frozen=True)
class TabularContract:
    """Coverage w(xi_k) paid at each grid point."""

    coverage: np.ndarray

    def __post_init__(self):
        w = as_row(self.coverage, "coverage").copy()
        w.setflags(write=False)
        object.__setattr__(self, "coverage", w)

    kind = "tabular"
    premium = 0.0

    def validate(self, grid: OutcomeGrid, tol=1e-12):
        if self.coverage.size != len(grid):
            raise DomainError("coverage length differs from grid")
        if np.any(self.coverage < -tol) or np.any(self.coverage > grid.points + tol):
            raise DomainError("coverage must satisfy 0 <= w(xi) <= xi")
        return self

    def payout(self, losses: np.ndarray) -> np.ndarray:
        return np.asarray(self.coverage)


@dataclass(frozen=True)
class LinearContract:
    """Pays a fixed fraction of the loss against an upfront premium."""

    coverage_fraction: float
    premium: float

    kind = "linear"

    def __post_init__(self):
        c, p = float(self.coverage_fraction), float(self.premium)
        if not 0.0 < c < 1.0:
            raise DomainError(f"coverage fraction {c} outside (0, 1)")
        if not p > 0.0:
            raise DomainError(f"premium {p} must be positive")
        object.__setattr__(self, "coverage_fraction", c)
        object.__setattr__(self, "premium", p)

    def validate(self, grid: OutcomeGrid, tol=1e-12):
        return self

    def payout(self, losses: np.ndarray) -> np.ndarray:
        return self.coverage_fraction * np.asarray(losses)


Contract = Union[TabularContract, LinearContract]


def clip_coverage(w, losses) -> np.ndarray:
    return np.minimum(np.maximum(np.asarray(w, dtype=float), 0.0), losses)


_G_KINDS = ("identity", "quadratic", "power")


@dataclass(frozen=True)
class DisutilitySpec:
    """Residual-loss disutility U = g(xi - w(xi)) + m x + m2 x^2 / 2 (+ premium).

    ``m2`` is a convex investment term used by smooth relaxations; it keeps the
    mixed partial in (x, w) at zero.
    """

    g: str = "quadratic"
    power: float = 2.0
    m: float = 0.0
    m2: float = 0.0

    def __post_init__(self):
        if self.g not in _G_KINDS:
            raise DomainError(f"unknown loss shape {self.g!r}; expected one of {_G_KINDS}")
        if self.g == "power" and not self.power >= 1.0:
            raise DomainError("power-p loss needs p >= 1 to stay convex")
        if self.m < 0 or self.m2 < 0:
            raise DomainError("investment cost coefficients must be nonnegative")

    @property
    def exponent(self) -> float:
        return {"identity": 1.0, "quadratic": 2.0}.get(self.g, float(self.power))

    def loss(self, t):
        t = np.asarray(t, dtype=float)
        if self.g == "identity":
            return t.copy()
        if self.g == "quadratic":
            return t * t
        return np.power(np.maximum(t, 0.0), self.exponent)

    def loss_prime(self, t):
        t = np.asarray(t, dtype=float)
        q = self.exponent
        if q == 1.0:
            return np.ones_like(t)
        if q == 2.0:
            return 2.0 * t
        return q * np.power(np.maximum(t, 0.0), q - 1.0)

    def loss_inverse(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        q = self.exponent
        if q == 1.0:
            return s.copy()
        if q == 2.0:
            return np.sqrt(s)
        return np.power(s, 1.0 / q)

    def investment(self, x: float) -> float:
        return self.m * x + 0.5 * self.m2 * x * x

    def investment_dx(self, x: float) -> float:
        return self.m + self.m2 * x

    def investment_dxx(self, x: float) -> float:
        return self.m2


def random_cost(disutility: DisutilitySpec, contract: Contract, losses, x: float) -> np.ndarray:
    """Agent's cost per grid point under ``contract`` and action ``x``."""
    losses = np.asarray(losses, dtype=float)
    residual = losses - contract.payout(losses)
    return disutility.loss(residual) + disutility.investment(x) + contract.premium


@dataclass(frozen=True)
class Scenario:
    model: OutcomeModel
    types: TypeSpace
    mu0: TypeDistribution
    disutility: DisutilitySpec
    U_bar: float
    gamma: float
    action_set: ActionSet
    name: str = field(default="scenario", compare=False)

    def __post_init__(self):
        if len(self.mu0) != len(self.types):
            raise DomainError("mu0 length differs from the number of types")
        if not (np.isfinite(self.U_bar) and self.U_bar > 0):
            raise DomainError(f"U_bar must be finite and positive, got {self.U_bar}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise DomainError(f"gamma must be finite and nonnegative, got {self.gamma}")
        if self.model.smooth:
            lo, hi = self.action_set.bounds
            if lo < 0.0 or hi > 1.0:
                raise DomainError("linear family needs actions inside [0, 1]")
        else:
            for a in self.action_set.grid():
                density(self.model, a)

    @property
    def losses(self) -> np.ndarray:
        return self.model.grid.points

    @property
    def n_types(self) -> int:
        return len(self.types)

    @property
    def investment_cost(self) -> float:
        return self.disutility.m

    def check_action(self, x: float) -> float:
        if not self.action_set.contains(x):
            raise DomainError(f"action {x} outside the declared action set")
        return float(x)

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)
