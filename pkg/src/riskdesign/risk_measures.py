"""Coherent risk measures on discrete random costs and their maximizing envelope densities.

Besides the expectation, two tail-sensitive measures are supported: the
absolute semideviation ``E[Z] + kappa E[(Z - E[Z])_+]`` and the average
value-at-risk ``min_t t + E[(Z - t)_+] / alpha``.  Each has a closed-form maximizer of its
dual representation ``rho[Z] = max_{zeta in envelope} E[zeta Z]``; an LP
over the envelope is kept as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import DomainError, as_row, check_simplex, type_weights
from .errors import InternalError
from .lp import linprog

KINDS = ("expectation", "semideviation", "avar")
TIE_TOL = 1e-12


@dataclass(frozen=True)
class RiskMeasureSpec:
    kind: str
    kappa: float = None
    alpha: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown risk measure {self.kind!r}")
        if self.kind == "semideviation":
            if self.kappa is None or not 0.0 < float(self.kappa) <= 1.0:
                raise DomainError(f"semideviation needs kappa in (0, 1], got {self.kappa}")
            object.__setattr__(self, "kappa", float(self.kappa))
        if self.kind == "avar":
            if self.alpha is None or not 0.0 < float(self.alpha) <= 1.0:
                raise DomainError(f"avar needs alpha in (0, 1], got {self.alpha}")
            object.__setattr__(self, "alpha", float(self.alpha))

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "semideviation":
            out["kappa"] = self.kappa
        if self.kind == "avar":
            out["alpha"] = self.alpha
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "RiskMeasureSpec":
        extra = set(doc) - {"kind", "kappa", "alpha"}
        if extra:
            raise DomainError(f"unknown risk measure fields {sorted(extra)}")
        return cls(doc.get("kind"), doc.get("kappa"), doc.get("alpha"))

    def __str__(self):
        if self.kind == "semideviation":
            return f"semideviation(kappa={self.kappa:g})"
        if self.kind == "avar":
            return f"avar(alpha={self.alpha:g})"
        return "expectation"


def Expectation() -> RiskMeasureSpec:
    return RiskMeasureSpec("expectation")


def AbsSemiDeviation(kappa: float) -> RiskMeasureSpec:
    return RiskMeasureSpec("semideviation", kappa=kappa)


def AverageValueAtRisk(alpha: float) -> RiskMeasureSpec:
    return RiskMeasureSpec("avar", alpha=alpha)


@dataclass(frozen=True)
class EnvelopeDensity:
    """Maximizing density (relative to ``probs``) and its objective value."""

    weights: np.ndarray
    value: float
    ties: bool = False


def _inputs(Z, probs):
    z = as_row(Z, "Z")
    p = check_simplex(probs, "probs", tol=1e-9)
    if z.shape != p.shape:
        raise DomainError(f"length mismatch: {z.size} costs vs {p.size} probabilities")
    return z, p


def _avar_quantile(z, p, alpha):
    """Upper alpha-tail quantile t*: P(Z > t*) <= alpha <= P(Z >= t*)."""
    order = np.argsort(-z, kind="stable")
    cum = 0.0
    for k in order:
        cum += p[k]
        if cum >= alpha - 1e-12:
            return z[k]
    return z[order[-1]]


def _avar(z, p, alpha):
    t = _avar_quantile(z, p, alpha)
    return t + float(np.dot(p, np.maximum(z - t, 0.0))) / alpha, t


def evaluate(spec: RiskMeasureSpec, Z, probs) -> float:
    """rho[Z] under outcome probabilities ``probs``."""
    z, p = _inputs(Z, probs)
    return evaluate_unchecked(spec, z, p)


def evaluate_unchecked(spec: RiskMeasureSpec, z: np.ndarray, p: np.ndarray) -> float:
    """``evaluate`` without input validation, for inner solver loops."""
    mean = float(np.dot(z, p))
    if spec.kind == "expectation":
        return mean
    if spec.kind == "semideviation":
        return mean + spec.kappa * float(np.dot(p, np.maximum(z - mean, 0.0)))
    return _avar(z, p, spec.alpha)[0]


def evaluate_batch(spec: RiskMeasureSpec, Z, probs) -> np.ndarray:
    """rho of every row of a (N, m) cost matrix under one probability row.

    The avar minimum over t is attained at an atom, so each row is scanned
    over its own values instead of sorted.
    """
    z = np.atleast_2d(np.asarray(Z, dtype=float))
    p = check_simplex(probs, "probs", tol=1e-9)
    if z.shape[1] != p.size:
        raise DomainError(f"length mismatch: {z.shape[1]} costs vs {p.size} probabilities")
    mean = z @ p
    if spec.kind == "expectation":
        return mean
    if spec.kind == "semideviation":
        return mean + spec.kappa * (np.maximum(z - mean[:, None], 0.0) @ p)
    live = p > 0
    cand = [t + (np.maximum(z - t[:, None], 0.0) @ p) / spec.alpha for t in z[:, live].T]
    return np.min(cand, axis=0)


def evaluate_dx(spec: RiskMeasureSpec, Z, probs, dprobs) -> float:
    """Derivative of rho[Z] along a probability perturbation ``dprobs`` (Z held fixed).

    Exact wherever the envelope indicator set does not change, i.e. no ties
    at the mean (semideviation) or at the quantile (avar).
    """
    z, p = _inputs(Z, probs)
    d = as_row(dprobs, "dprobs")
    dmean = float(np.dot(d, z))
    if spec.kind == "expectation":
        return dmean
    if spec.kind == "semideviation":
        mean = float(np.dot(z, p))
        above = z > mean
        return dmean + spec.kappa * (float(np.dot(d, np.maximum(z - mean, 0.0))) - float(p[above].sum()) * dmean)
    t = _avar_quantile(z, p, spec.alpha)
    return float(np.dot(d, np.maximum(z - t, 0.0))) / spec.alpha


def has_tie(spec: RiskMeasureSpec, Z, probs) -> bool:
    """True when the maximizing density is not unique."""
    z, p = _inputs(Z, probs)
    if spec.kind == "expectation":
        return False
    scale = 1.0 + np.abs(z).max()
    live = p > 0
    if spec.kind == "semideviation":
        mean = float(np.dot(z, p))
        return bool(np.any((np.abs(z - mean) <= TIE_TOL * scale) & live))
    t = _avar_quantile(z, p, spec.alpha)
    at = (np.abs(z - t) <= TIE_TOL * scale) & live
    if at.sum() < 2:
        return False
    # several atoms share the quantile; the split among them is free unless they are all in or all out
    boundary = (spec.alpha - float(p[live & (z > t + TIE_TOL * scale)].sum())) / float(p[at].sum())
    return bool(1e-12 < boundary < 1.0 - 1e-12)


def envelope_density(spec: RiskMeasureSpec, Z, probs) -> EnvelopeDensity:
    """Closed-form maximizer of E[zeta Z] over the measure's envelope."""
    z, p = _inputs(Z, probs)
    m = z.size
    if spec.kind == "expectation":
        zeta = np.ones(m)
    elif spec.kind == "semideviation":
        h = (z > float(np.dot(z, p))).astype(float)
        zeta = 1.0 + spec.kappa * (h - float(np.dot(h, p)))
    else:
        t = _avar_quantile(z, p, spec.alpha)
        above = z > t
        at = z == t
        zeta = np.where(above, 1.0 / spec.alpha, 0.0)
        mass_at = float(p[at].sum())
        if mass_at > 0:
            zeta[at] = (1.0 - float(p[above].sum()) / spec.alpha) / mass_at
    return EnvelopeDensity(zeta, float(np.dot(p, zeta * z)), has_tie(spec, z, p))


def envelope_lp_oracle(spec: RiskMeasureSpec, Z, probs) -> EnvelopeDensity:
    """Maximize E[zeta Z] over the envelope by a small dense LP."""
    z, p = _inputs(Z, probs)
    m = z.size
    if spec.kind == "expectation":
        res = linprog(-(p * z), A_eq=p[None, :], b_eq=[1.0], bounds=[(1.0, 1.0)] * m)
        zeta = res.x
    elif spec.kind == "semideviation":
        # zeta = 1 + h - E[h], 0 <= h <= kappa; objective is E[Z] + sum_k h_k p_k (Z_k - E[Z])
        mean = float(np.dot(z, p))
        res = linprog(-(p * (z - mean)), bounds=[(0.0, spec.kappa)] * m)
        zeta = 1.0 + res.x - float(np.dot(res.x, p)) if res.status == "optimal" else None
    else:
        res = linprog(-(p * z), A_eq=p[None, :], b_eq=[1.0], bounds=[(0.0, 1.0 / spec.alpha)] * m)
        zeta = res.x
    if res.status != "optimal":
        raise InternalError(f"envelope LP returned {res.status} for {spec}")
    return EnvelopeDensity(np.asarray(zeta), float(np.dot(p, zeta * z)), has_tie(spec, z, p))


def mixture_risk(space, mu, Z, probs) -> float:
    """Type-weighted perceived risk: sum_i mu_i rho_i[Z]."""
    w = type_weights(mu, len(space))
    return float(sum(wi * evaluate(t, Z, probs) for wi, t in zip(w, space)))


def risk_by_type(space, Z, probs) -> np.ndarray:
    return np.array([evaluate(t, Z, probs) for t in space])
